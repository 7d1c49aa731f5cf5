// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned here, not tuned at run time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cbdi/classifier.hpp"
#include "cbdi/cli.hpp"
#include "cbdi/generator.hpp"
#include "cbdi/parallel.hpp"
#include "cbdi/passage.hpp"
#include "cbdi/rng.hpp"
#include "cbdi/simulator.hpp"
#include "cbdi/special.hpp"

using namespace cbdi;

namespace {

int g_threads = 8;

struct Summary {
    int passed = 0;
    int failed = 0;
};

void report(Summary& s, const char* name, bool ok, double seconds,
            const std::string& detail) {
    std::printf("[%s] %-14s %6.1fs  %s\n", ok ? "PASS" : "FAIL", name, seconds,
                detail.c_str());
    std::fflush(stdout);
    (ok ? s.passed : s.failed) += 1;
}

template <typename Fn>
void run(Summary& s, const char* name, Fn fn, double budget_s = 0.0) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0.0 && dt > budget_s) {
        ok = false;
        detail += " [over the " + std::to_string(budget_s) + "s budget]";
    }
    report(s, name, ok, dt, detail);
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
    long n = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe r;
    r.n = static_cast<long>(v.size());
    double s = 0.0, s2 = 0.0;
    for (double x : v) {
        s += x;
        s2 += x * x;
    }
    r.mean = s / r.n;
    r.se = std::sqrt(std::max(0.0, (s2 / r.n - r.mean * r.mean) / r.n));
    return r;
}

// ---------------------------------------------------------------------------
// 1. Deterministic flow oracle, from a finite start and from large starts.
bool c1_flow(std::string& detail) {
    const Mechanism m(0.0, 0.0, LevyMeasure::zero());
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0); // I(x) = x^2

    SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_max = 5.0;
    cfg.seed = 1;

    const auto rec = simulate_path(m, d, 10.0, cfg);
    double worst = 0.0;
    for (size_t i = 0; i < rec.times.size(); ++i) {
        const double exact = 10.0 / (1.0 + 10.0 * rec.times[i]);
        worst = std::max(worst, std::fabs(rec.values[i] - exact) / exact);
    }

    const std::vector<double> grid = {1e2, 1e3, 1e4, 1e5, 1e6};
    const auto env = simulate_from_infinity(m, d, cfg, grid, 0.01, 1e-3, 1);
    double worst_env = 0.0;
    const auto& top = env.sample_paths.back();
    for (size_t i = 0; i < top.times.size(); ++i) {
        const double t = top.times[i];
        if (t < 0.01) continue;
        const double exact = 1.0 / t;
        worst_env = std::max(worst_env, std::fabs(top.values[i] - exact) / exact);
    }

    std::ostringstream os;
    os << "max rel err " << worst << " (finite start), " << worst_env
       << " (envelope), stabilized=" << env.stabilized;
    detail = os.str();
    return worst <= 1e-3 && worst_env <= 1e-3 && env.stabilized;
}

// ---------------------------------------------------------------------------
// 2. Regime table vs the quadrature classifier on random parameters.
bool c2_table(std::string& detail) {
    RngStream rng(20240811, 0, StreamRole::UniformMark);
    int agree = 0, total = 0;
    std::vector<int> row_seen(10, 0);
    const std::vector<std::string> row_names = {"a1", "a2", "a3", "a4", "a5",
                                                "b1", "b2", "b3", "b4", "b5"};

    // targeted corners guarantee every row appears, the rest is random
    struct Pt {
        double a, b, ah, bh;
    };
    std::vector<Pt> pts = {
        {1.5, 0.0, 1.5, 0.0},  // a1 b1
        {1.5, 0.0, 1.0, 2.0},  // a2 b2
        {1.5, 0.0, 1.0, 0.5},  // a2 only
        {0.6, 0.0, 2.0, 0.0},  // a3 b3
        {0.6, 0.0, 2.0, 2.0},  // a3 b3 via dominance
        {0.5, 0.0, 1.5, 1.5},  // a4 b4
        {1.0, 0.0, 1.0, 1.5},  // a5 b5
        {1.0, 0.0, 1.0, 0.5},  // a5 only
    };
    while (pts.size() < 200) {
        Pt p;
        p.a = 0.1 + rng.next_uniform(1.9);
        p.b = rng.next_uniform(4.0) - 2.0;
        const double pick = rng.next_double();
        if (pick < 0.2) p.ah = 1.0;
        else if (pick < 0.4) p.ah = 2.0;
        else if (pick < 0.55 && p.a < 1.0) p.ah = 2.0 - p.a;
        else p.ah = 1.0 + rng.next_double();
        p.bh = rng.next_uniform(4.0) - 2.0;
        pts.push_back(p);
    }

    for (const auto& p : pts) {
        const double cb = 0.5 + rng.next_uniform(1.5);
        const double ci = 0.5 + rng.next_uniform(1.5);
        const double u0 =
            (p.b == 0.0) ? 1.0 : std::exp(std::max(1.0, p.b / p.a + 0.5));
        const auto levy = LevyMeasure::pareto_log_tail(p.a, p.b, cb, u0);
        const auto drift = DriftSpec::power_log(ci, p.ah, p.bh);
        const auto rep = classify(Mechanism(0.0, 0.0, levy), drift);
        const auto rows = regime_table(p.a, p.b, p.ah, p.bh);
        for (size_t r = 0; r < row_names.size(); ++r)
            if (std::find(rows.begin(), rows.end(), row_names[r]) != rows.end())
                row_seen[r] = 1;
        const bool any_a = std::any_of(rows.begin(), rows.end(),
                                       [](const std::string& r) { return r[0] == 'a'; });
        const bool any_b = std::any_of(rows.begin(), rows.end(),
                                       [](const std::string& r) { return r[0] == 'b'; });
        const bool ok = ((rep.nonexplosion == Verdict::Guaranteed) == any_a) &&
                        ((rep.cdi == Verdict::Guaranteed) == any_b);
        agree += ok;
        ++total;
    }
    const int rows_hit =
        static_cast<int>(std::count(row_seen.begin(), row_seen.end(), 1));
    std::ostringstream os;
    os << agree << "/" << total << " agree, " << rows_hit << "/10 rows exercised";
    detail = os.str();
    return agree == total && rows_hit == 10;
}

// ---------------------------------------------------------------------------
// 3. Log-moment criterion for the quadratic drift.
bool c3_log_moment(std::string& detail) {
    const auto d = DriftSpec::logistic(1.0).with_kappa(1.0);
    bool ok = true;
    std::ostringstream os;
    for (double alpha : {0.5, 1.0, 1.5}) {
        const auto levy = LevyMeasure::pareto_log_tail(alpha, 0.0, 1.0, 1.0);
        const auto rep = classify(Mechanism(0.0, 0.0, levy), d);
        const bool g = rep.cdi == Verdict::Guaranteed &&
                       rep.integral_J.is_finite() &&
                       rep.integral_J.residual < 1e-6 * rep.integral_J.value + 1e-8;
        os << "alpha=" << alpha << (g ? " ok " : " BAD ");
        ok &= g;
    }
    // tail 1/log u carries an infinite log moment: inconclusive
    const auto slow = LevyMeasure::pareto_log_tail(0.0, -1.0, 1.0, M_E);
    const auto rep = classify(Mechanism(0.0, 0.0, slow), d);
    const bool inc =
        rep.cdi == Verdict::Inconclusive && rep.integral_I.is_infinite();
    os << "log-tail " << (inc ? "inconclusive" : "BAD");
    ok &= inc;
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------------------
// 4. The second Lyapunov scan settles in [-1.05, -0.95] past 1e4.
bool c4_lyapunov_limit(std::string& detail) {
    const Mechanism m(0.0, 0.0, LevyMeasure::pareto_log_tail(0.5, 0.0, 1.0, 1.0));
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    const auto rep = lyapunov_margin(m, d, LyapunovWhich::F2);
    if (!rep.certified) {
        detail = "margin not certified: " + rep.reason;
        return false;
    }
    double lo = 0.0, hi = -2.0;
    bool ok = true;
    for (const auto& pt : rep.curve) {
        if (pt.z < 1e4) continue;
        ok &= pt.xf >= -1.05 && pt.xf <= -0.95;
        lo = std::min(lo, pt.xf);
        hi = std::max(hi, pt.xf);
    }
    std::ostringstream os;
    os << "Xf2 range past 1e4: [" << lo << ", " << hi << "]";
    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------------------
// 5. Dual-route identity on 20 parametric instances.
bool c5_fubini(std::string& detail) {
    std::vector<std::pair<LevyMeasure, DriftSpec>> instances;
    for (double h0 : {2.0, M_E, 10.0})
        for (double c : {1.0, 2.0})
            instances.emplace_back(LevyMeasure::point_mass(h0, 0.7),
                                   DriftSpec::logistic(c).with_kappa(1.0));
    for (double ahat : {1.5, 2.0, 2.5})
        instances.emplace_back(LevyMeasure::point_mass(3.0, 1.1),
                               DriftSpec::power_log(1.0, ahat, 0.0).with_kappa(1.0));
    for (double alpha : {0.5, 1.0, 1.5})
        for (double beta : {-1.0, 0.0, 1.0}) {
            const double u0 = beta == 0.0 ? 1.0 : std::exp(2.0 + beta);
            instances.emplace_back(LevyMeasure::pareto_log_tail(alpha, beta, 1.0, u0),
                                   DriftSpec::logistic(2.0).with_kappa(1.0));
        }
    instances.emplace_back(LevyMeasure::pareto_log_tail(1.5, 0.0, 1.0, 1.0),
                           DriftSpec::power_log(1.0, 1.5, 0.0).with_kappa(1.0));
    instances.emplace_back(LevyMeasure::pareto_log_tail(1.0, 0.0, 0.8, 1.0),
                           DriftSpec::power_log(1.0, 2.0, 0.0).with_kappa(1.0));

    int checked = 0;
    double worst = 0.0;
    for (const auto& [levy, drift] : instances) {
        const auto direct = integral_I(levy, drift);
        if (!direct.is_finite() || direct.value == 0.0) continue;
        const auto via_G = moment_criterion(levy, drift); // throws on mismatch
        worst = std::max(worst,
                         std::fabs(via_G.value - direct.value) / direct.value);
        ++checked;
    }
    std::ostringstream os;
    os << checked << " finite instances, worst rel gap " << worst;
    detail = os.str();
    return checked >= 20 && worst <= 1e-6;
}

// ---------------------------------------------------------------------------
// 6. Pathwise comparison under shared noise, pure-jump instances.
bool c6_coupling(std::string& detail) {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0; // 1000 steps
    cfg.seed = 6;

    long violations = 0;
    const std::vector<LevyMeasure> measures = {
        LevyMeasure::point_mass(1.0, 1.0),
        LevyMeasure::pareto_log_tail(1.5, 0.0, 1.0, 1.0),
    };
    for (size_t mi = 0; mi < measures.size(); ++mi) {
        const Mechanism m(0.0, 0.0, measures[mi]);
        // 500 bundles per measure: 1000 coupled paths per comparison kind
        std::vector<long> vio(500, 0);
        parallel_for(500, g_threads, [&](std::size_t b) {
            const std::vector<double> inits = {1.0, 5.0};
            const auto bundle = simulate_coupled(m, DriftSpec::none(), inits, cfg, b);
            for (size_t i = 0; i < bundle[0].times.size(); ++i)
                if (bundle[1].values[i] < bundle[0].values[i]) ++vio[b];
        });
        for (long v : vio) violations += v;

        std::vector<long> vio2(500, 0);
        const DriftSpec drifts[2] = {DriftSpec::none(), DriftSpec::logistic(2.0)};
        parallel_for(500, g_threads, [&](std::size_t b) {
            const auto bundle = simulate_coupled_drifts(m, drifts, 5.0, cfg, 1000 + b);
            for (size_t i = 0; i < bundle[0].times.size(); ++i)
                if (bundle[1].values[i] > bundle[0].values[i]) ++vio2[b];
        });
        for (long v : vio2) violations += v;
    }
    std::ostringstream os;
    os << "ordering violations: " << violations;
    detail = os.str();
    return violations == 0;
}

// ---------------------------------------------------------------------------
// 7. Square-root diffusion ensemble mean.
bool c7_moment(std::string& detail) {
    const Mechanism m(1.0, 0.5, LevyMeasure::zero());
    SimConfig cfg;
    cfg.dt = 2e-3;
    cfg.t_max = 1.0;
    cfg.seed = 7;
    const int n = 10000;
    std::vector<double> finals(n);
    parallel_for(n, g_threads, [&](std::size_t i) {
        finals[i] = simulate_path(m, DriftSpec::none(), 10.0, cfg, i).values.back();
    });
    const auto ms = mean_se(finals);
    const double target = 10.0 * std::exp(-0.5);
    std::ostringstream os;
    os << "mean " << ms.mean << " vs " << target << " (3se = " << 3.0 * ms.se << ")";
    detail = os.str();
    return std::fabs(ms.mean - target) <= 3.0 * ms.se;
}

// ---------------------------------------------------------------------------
// 8. Explosion dichotomy for the heavy tail, suppressed by a quadratic drift.
bool c8_explosion(std::string& detail) {
    const LevyMeasure heavy = LevyMeasure::pareto_log_tail(0.5, 0.0, 1.0, 1.0);
    const Mechanism m(0.0, 0.0, heavy);

    SimConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_max = 5.0;
    cfg.seed = 8;
    cfg.n_paths = 400;
    cfg.x_explode = 1e12; // probe also runs the widened cap 1e13
    const auto probe = explosion_probe(m, DriftSpec::none(), 1.0, cfg, g_threads);

    SimConfig cfg2 = cfg;
    cfg2.n_paths = 10000;
    cfg2.t_max = 5.0;
    cfg2.seed = 42;
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    std::vector<char> hits(cfg2.n_paths, 0);
    parallel_for(cfg2.n_paths, g_threads, [&](std::size_t i) {
        hits[i] = simulate_path(m, d, 1.0, cfg2, i).exploded() ? 1 : 0;
    });
    long tamed_hits = 0;
    for (char h : hits) tamed_hits += h;
    const double ub = clopper_pearson_upper(tamed_hits, cfg2.n_paths, 0.995);

    std::ostringstream os;
    os << "heavy: frac " << probe.base.fraction << "/" << probe.widened.fraction
       << " (rel change " << probe.relative_change << "), tamed: " << tamed_hits
       << " hits, ub " << ub;
    detail = os.str();
    return probe.base.fraction >= 0.2 && probe.widened.fraction >= 0.2 &&
           probe.relative_change < 0.10 && tamed_hits == 0 && ub < 1e-3;
}

// ---------------------------------------------------------------------------
// 9. Entrance certificates: exact flow, jump instance, and a non-example.
bool c9_cdi(std::string& detail) {
    std::ostringstream os;
    bool ok = true;

    { // quadratic flow: mean passage 1 - 1/x, saturating at 1
        const Mechanism m(0.0, 0.0, LevyMeasure::zero());
        const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
        SimConfig cfg;
        cfg.dt = 1e-3;
        cfg.t_max = 3.0;
        cfg.seed = 91;
        cfg.n_paths = 2;
        const std::vector<double> grid = {10.0, 1e2, 1e4, 1e6};
        const auto cert = cdi_certificate(m, d, cfg, grid, 1.0, 2);
        const double expect[4] = {0.9, 0.99, 0.9999, 0.999999};
        for (int i = 0; i < 4; ++i)
            ok &= std::fabs(cert.estimates[i].mean - expect[i]) <= 1e-3;
        ok &= std::fabs(cert.estimates[3].mean - 1.0) <= 1e-3 && cert.saturated;
        os << "flow means ok=" << ok;
    }

    { // quadratic drift with unit atoms at e: saturation within noise
        const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(M_E, 1.0));
        const auto d = DriftSpec::logistic(1.0).with_kappa(1.0);
        SimConfig cfg;
        cfg.dt = 1e-3;
        cfg.t_max = 30.0;
        cfg.seed = 92;
        cfg.n_paths = 600;
        const std::vector<double> grid = {1e2, 1e4, 1e6};
        const auto cert = cdi_certificate(m, d, cfg, grid, 1.0, g_threads);
        ok &= cert.saturated;
        os << ", jump increment " << cert.last_increment << " (err "
           << cert.last_increment_err << ")";
    }

    { // linear rate: no saturation, increments dominate the noise
        const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(2.0, 0.3));
        const auto d = DriftSpec::linear(1.0);
        SimConfig cfg;
        cfg.dt = 5e-3;
        cfg.t_max = 60.0;
        cfg.seed = 93;
        cfg.n_paths = 500;
        const std::vector<double> grid = {1e2, 1e3, 1e4};
        const auto cert = cdi_certificate(m, d, cfg, grid, 1.0, g_threads);
        ok &= !cert.saturated;
        ok &= cert.last_increment > 10.0 * (cert.last_increment_err / 3.0);
        os << ", linear increment " << cert.last_increment << " vs mc sigma "
           << cert.last_increment_err / 3.0;
    }

    detail = os.str();
    return ok;
}

// ---------------------------------------------------------------------------
// 10. Local-martingale identity for a bounded smooth test function.
bool c10_martingale(std::string& detail) {
    const Mechanism m(1.0, 0.5, LevyMeasure::point_mass(2.0, 0.3));
    const auto d = DriftSpec::none();
    const auto tf = TestFunction::custom([](double x) { return std::exp(-x); },
                                         [](double x) { return -std::exp(-x); },
                                         [](double x) { return std::exp(-x); });
    const double x0 = 2.0;
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.seed = 10;
    cfg.max_record_points = 250;

    const int n = 10000;
    std::vector<double> lhs(n), integral(n);
    parallel_for(n, g_threads, [&](std::size_t i) {
        const auto rec = simulate_path(m, d, x0, cfg, i);
        lhs[i] = std::exp(-rec.values.back());
        double acc = 0.0;
        for (size_t k = 1; k < rec.times.size(); ++k) {
            const double dt = rec.times[k] - rec.times[k - 1];
            const double xa = rec.values[k - 1], xb = rec.values[k];
            const double ga = xa > 0.0 ? apply_generator(m, d, tf, xa) : 0.0;
            const double gb = xb > 0.0 ? apply_generator(m, d, tf, xb) : 0.0;
            acc += 0.5 * (ga + gb) * dt;
        }
        integral[i] = acc;
    });
    std::vector<double> resid(n);
    for (int i = 0; i < n; ++i)
        resid[i] = lhs[i] - std::exp(-x0) - integral[i];
    const auto ms = mean_se(resid);
    std::ostringstream os;
    os << "martingale residual " << ms.mean << " (3se = " << 3.0 * ms.se << ")";
    detail = os.str();
    return std::fabs(ms.mean) <= 3.0 * ms.se;
}

// ---------------------------------------------------------------------------
// 11. Byte-identical outputs across thread counts.
bool c11_determinism(std::string& detail) {
    const char* cfg_text = R"(
[mechanism]
sigma = 1.0
gamma = 0.3
levy.family = "point_mass"
levy.h0 = 2.0
levy.rate = 0.4
[drift]
family = "logistic"
c = 1.0
[sim]
dt = 2e-3
t_max = 1.0
n_paths = 64
seed = 11
[experiment]
x0 = 2.0
)";
    std::ofstream("/tmp/cbdi_acc_det.toml") << cfg_text;
    auto run_with = [&](const char* threads, const char* out) {
        const char* argv[] = {"cbdi",    "simulate",  "--config",
                              "/tmp/cbdi_acc_det.toml", "--format", "csv",
                              "--out",   out,         "--threads", threads};
        return run_cli(10, argv);
    };
    if (run_with("1", "/tmp/cbdi_acc_a.csv") != 0) {
        detail = "cli run failed";
        return false;
    }
    if (run_with("4", "/tmp/cbdi_acc_b.csv") != 0) {
        detail = "cli run failed";
        return false;
    }
    auto slurp = [](const char* p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream os;
        os << f.rdbuf();
        return os.str();
    };
    const std::string a = slurp("/tmp/cbdi_acc_a.csv");
    const std::string b = slurp("/tmp/cbdi_acc_b.csv");

    // a coupled estimator as well
    const char* cdi_text = R"(
[mechanism]
sigma = 0.0
gamma = 0.0
levy.family = "point_mass"
levy.h0 = 2.7182818284590452
levy.rate = 1.0
[drift]
family = "logistic"
c = 1.0
kappa = 1.0
[sim]
dt = 2e-3
t_max = 10.0
n_paths = 32
seed = 12
[experiment]
x_grid = [100, 1000]
level = 1.0
)";
    std::ofstream("/tmp/cbdi_acc_cdi.toml") << cdi_text;
    auto run_cdi = [&](const char* threads, const char* out) {
        const char* argv[] = {"cbdi",    "cdi",       "--config",
                              "/tmp/cbdi_acc_cdi.toml", "--format", "json",
                              "--out",   out,         "--threads", threads};
        return run_cli(10, argv);
    };
    if (run_cdi("1", "/tmp/cbdi_acc_c.json") != 0 ||
        run_cdi("3", "/tmp/cbdi_acc_d.json") != 0) {
        detail = "cdi cli run failed";
        return false;
    }
    const std::string c = slurp("/tmp/cbdi_acc_c.json");
    const std::string dd = slurp("/tmp/cbdi_acc_d.json");
    detail = "simulate bytes equal: " + std::string(a == b ? "yes" : "NO") +
             ", cdi bytes equal: " + (c == dd ? "yes" : "NO");
    return !a.empty() && a == b && !c.empty() && c == dd;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_threads = std::max(1, std::atoi(argv[1]));
    Summary s;
    run(s, "C1 flow", c1_flow, 10.0);
    run(s, "C2 table", c2_table, 60.0);
    run(s, "C3 log-moment", c3_log_moment, 30.0);
    run(s, "C4 lyapunov", c4_lyapunov_limit, 30.0);
    run(s, "C5 fubini", c5_fubini);
    run(s, "C6 coupling", c6_coupling, 60.0);
    run(s, "C7 cb-moment", c7_moment);
    run(s, "C8 explosion", c8_explosion);
    run(s, "C9 cdi", c9_cdi);
    run(s, "C10 martingale", c10_martingale);
    run(s, "C11 determinism", c11_determinism);
    std::printf("%d passed, %d failed\n", s.passed, s.failed);
    return s.failed == 0 ? 0 : 1;
}
