#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cbdi/parallel.hpp"
#include "cbdi/passage.hpp"
#include "cbdi/simulator.hpp"

using namespace cbdi;

namespace {

SimConfig base_cfg() {
    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_max = 1.0;
    cfg.seed = 7;
    cfg.n_paths = 1;
    return cfg;
}

double value_at(const PathRecord& p, double t) {
    auto it = std::lower_bound(p.times.begin(), p.times.end(), t - 1e-12);
    REQUIRE(it != p.times.end());
    return p.values[static_cast<size_t>(it - p.times.begin())];
}

} // namespace

TEST_CASE("absorbing start") {
    const Mechanism m(1.0, 0.5, LevyMeasure::zero());
    const auto rec = simulate_path(m, DriftSpec::none(), 0.0, base_cfg());
    CHECK(rec.extinct());
    CHECK(rec.status_time == 0.0);
    for (double v : rec.values) CHECK(v == 0.0);
}

TEST_CASE("deterministic quadratic flow matches the closed form") {
    const Mechanism m(0.0, 0.0, LevyMeasure::zero());
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0); // I(x) = x^2
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    const auto rec = simulate_path(m, d, 10.0, cfg);
    for (size_t i = 0; i < rec.times.size(); ++i) {
        const double exact = 10.0 / (1.0 + 10.0 * rec.times[i]);
        CHECK(std::fabs(rec.values[i] - exact) <= 1.2e-3 * exact);
    }
}

TEST_CASE("square-root diffusion mean decay") {
    const Mechanism m(1.0, 0.5, LevyMeasure::zero());
    SimConfig cfg = base_cfg();
    cfg.dt = 2e-3;
    cfg.t_max = 1.0;
    const int n = 3000;
    std::vector<double> finals(n);
    parallel_for(n, 4, [&](std::size_t i) {
        finals[i] = simulate_path(m, DriftSpec::none(), 10.0, cfg, i).values.back();
    });
    double s = 0.0, s2 = 0.0;
    for (double v : finals) {
        s += v;
        s2 += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::fabs(mean - 10.0 * std::exp(-0.5)) <= 3.0 * se + 0.02);
}

TEST_CASE("pathwise ordering in the initial value (pure jump)") {
    const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(1.0, 1.0));
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    const std::vector<double> initials = {1.0, 5.0};
    long violations = 0;
    for (uint64_t b = 0; b < 100; ++b) {
        const auto bundle = simulate_coupled(m, DriftSpec::none(), initials, cfg, b);
        for (size_t i = 0; i < bundle[0].times.size(); ++i)
            if (bundle[1].values[i] < bundle[0].values[i]) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("pathwise ordering in the drift (pure jump)") {
    const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(1.0, 1.0));
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    const DriftSpec drifts[2] = {DriftSpec::none(), DriftSpec::logistic(2.0)};
    long violations = 0;
    for (uint64_t b = 0; b < 100; ++b) {
        const auto bundle = simulate_coupled_drifts(m, drifts, 5.0, cfg, b);
        // larger drift stays below
        for (size_t i = 0; i < bundle[0].times.size(); ++i)
            if (bundle[1].values[i] > bundle[0].values[i] + 1e-12) ++violations;
    }
    CHECK(violations == 0);
}

TEST_CASE("linear drift folds into the linear rate exactly") {
    const LevyMeasure levy = LevyMeasure::point_mass(2.0, 0.5);
    const Mechanism m1(1.0, 0.3, levy);
    const Mechanism m2(1.0, 1.0, levy);
    SimConfig cfg = base_cfg();
    cfg.t_max = 2.0;
    const auto a = simulate_path(m1, DriftSpec::linear(0.7), 4.0, cfg, 11);
    const auto b = simulate_path(m2, DriftSpec::none(), 4.0, cfg, 11);
    REQUIRE(a.times.size() == b.times.size());
    for (size_t i = 0; i < a.times.size(); ++i) {
        CHECK(a.times[i] == b.times[i]);
        CHECK(a.values[i] == b.values[i]); // bitwise
    }
    CHECK(a.jumps.size() == b.jumps.size());
}

TEST_CASE("refinement: halving dt shrinks the deterministic error geometrically") {
    const Mechanism m(0.0, 0.0, LevyMeasure::zero());
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    cfg.stiffness_cap = 1e9; // expose the raw base-step error
    auto run = [&](double dt) {
        cfg.dt = dt;
        return simulate_path(m, d, 10.0, cfg).values.back();
    };
    const double m1 = run(0.02), m2 = run(0.01), m3 = run(0.005);
    CHECK(std::fabs(m1 - m2) <= 3.0 * std::fabs(m2 - m3));
    CHECK(std::fabs(m2 - m3) > 0.0);
}

TEST_CASE("refinement with jumps within Monte Carlo slack") {
    const Mechanism m(0.0, 0.2, LevyMeasure::point_mass(2.0, 0.5));
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    const int n = 4000;
    auto mean_at = [&](double dt) {
        cfg.dt = dt;
        double s = 0.0, s2 = 0.0;
        std::vector<double> finals(n);
        parallel_for(n, 4, [&](std::size_t i) {
            SimConfig c2 = cfg;
            c2.seed = 1000 + static_cast<uint64_t>(dt * 1e6);
            finals[i] = simulate_path(m, DriftSpec::none(), 10.0, c2, i).values.back();
        });
        for (double v : finals) {
            s += v;
            s2 += v * v;
        }
        const double mu = s / n;
        return std::pair(mu, std::sqrt((s2 / n - mu * mu) / n));
    };
    const auto [a, sea] = mean_at(0.05);
    const auto [b, seb] = mean_at(0.025);
    const auto [c, sec] = mean_at(0.0125);
    const double se = 3.0 * std::sqrt(sea * sea + seb * seb + sec * sec);
    CHECK(std::fabs(a - b) <= 3.0 * std::fabs(b - c) + 2.0 * se);
}

TEST_CASE("coupled spread is dominated by the tilted branching process") {
    // drift I(z) = z^2 - z has one-sided constant b = 1; the spread between
    // coupled paths is stochastically below the process with linear rate
    // shifted by -b.
    const auto drift = DriftSpec::custom([](double z) { return z * z - z; },
                                         [](double z) { return 2.0 * z - 1.0; }, 1.0);
    const LevyMeasure levy = LevyMeasure::point_mass(2.0, 1.0);
    const Mechanism m(0.0, 0.0, levy);
    const Mechanism dominating(0.0, -1.0, levy); // gamma - b

    SimConfig cfg = base_cfg();
    cfg.t_max = 0.5;
    const int n = 2000;
    std::vector<double> spread(n), dom(n);
    parallel_for(n, 4, [&](std::size_t i) {
        const std::vector<double> inits = {5.0, 6.0};
        const auto bundle = simulate_coupled(m, drift, inits, cfg, i);
        const double lo = bundle[0].values.back();
        const double hi = bundle[1].values.back();
        spread[i] = std::isinf(hi) ? 1e18 : hi - lo;
        SimConfig c2 = cfg;
        c2.seed = 555;
        dom[i] = simulate_path(dominating, DriftSpec::none(), 1.0, c2, i).values.back();
    });
    std::sort(dom.begin(), dom.end());
    for (double q : {0.5, 0.9}) {
        const double y = dom[static_cast<size_t>(q * (n - 1))];
        double frac = 0.0;
        for (double s : spread)
            if (s > y) frac += 1.0 / n;
        const double se = std::sqrt(q * (1.0 - q) / n);
        CHECK(frac <= (1.0 - q) + 6.0 * se);
    }
}

TEST_CASE("diffusive coupling: quantiles ordered by the initial value") {
    // with noise the cell discretization only preserves the ordering in law;
    // the coupled quantiles must match independent per-initial simulations
    const Mechanism m(1.0, 0.0, LevyMeasure::zero());
    const auto d = DriftSpec::logistic(1.0);
    SimConfig cfg = base_cfg();
    cfg.dt = 5e-3;
    cfg.t_max = 1.0;
    const int n = 3000;
    const std::vector<double> inits = {1.0, 2.0, 4.0};

    std::vector<std::vector<double>> coupled(3, std::vector<double>(n));
    parallel_for(n, 4, [&](std::size_t b) {
        const auto bundle = simulate_coupled(m, d, inits, cfg, b);
        for (int j = 0; j < 3; ++j) coupled[j][b] = bundle[j].values.back();
    });
    std::vector<std::vector<double>> indep(3, std::vector<double>(n));
    parallel_for(n, 4, [&](std::size_t i) {
        SimConfig c2 = cfg;
        c2.seed = 777;
        for (int j = 0; j < 3; ++j)
            indep[j][i] = simulate_path(m, d, inits[j], c2, i * 3 + j).values.back();
    });

    auto quantile = [](std::vector<double> v, double q) {
        std::sort(v.begin(), v.end());
        return v[static_cast<size_t>(q * (v.size() - 1))];
    };
    for (double q : {0.1, 0.5, 0.9}) {
        double prev = -1.0;
        for (int j = 0; j < 3; ++j) {
            const double qc = quantile(coupled[j], q);
            CHECK(qc >= prev); // nondecreasing in the initial value
            prev = qc;
            const double qi = quantile(indep[j], q);
            CHECK(qc == doctest::Approx(qi).epsilon(0.15).scale(1.0));
        }
    }
}

TEST_CASE("from-infinity envelope collapses onto the deterministic flow") {
    const Mechanism m(0.0, 0.0, LevyMeasure::zero());
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    cfg.n_paths = 1;
    const std::vector<double> grid = {1e2, 1e4, 1e6};
    const auto rep = simulate_from_infinity(m, d, cfg, grid, 0.01, 1e-3, 1);
    CHECK(rep.cdi_certified);
    CHECK(rep.stabilized);
    CHECK_FALSE(rep.any_explosion);
    const auto& top = rep.sample_paths.back();
    for (size_t i = 0; i < top.times.size(); ++i) {
        const double t = top.times[i];
        if (t < 0.01) continue;
        CHECK(std::fabs(top.values[i] - 1.0 / t) <= 1.5e-3 / t);
    }
}

TEST_CASE("stochastic envelope stabilizes when entrance is certified") {
    // quadratic drift with unit-rate atoms at e: coupled paths from large
    // starts collapse onto one trajectory; doubling the top start leaves the
    // envelope unchanged
    const Mechanism m(0.0, 0.0, LevyMeasure::point_mass(M_E, 1.0));
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    SimConfig cfg = base_cfg();
    cfg.t_max = 2.0;
    cfg.n_paths = 40;
    const std::vector<double> grid = {1e2, 1e4, 1e6};
    const auto rep = simulate_from_infinity(m, d, cfg, grid, 0.5, 1e-3, 4);
    CHECK(rep.cdi_certified);
    CHECK(rep.stabilized);

    const std::vector<double> wider = {1e2, 1e4, 1e6, 2e6};
    const auto rep2 = simulate_from_infinity(m, d, cfg, wider, 0.5, 1e-3, 4);
    // the added level changes nothing past the probe time
    double worst = 0.0;
    for (size_t i = 0; i < rep2.times.size(); ++i)
        if (rep2.times[i] >= 0.5)
            worst = std::max(worst, std::fabs(rep2.mean_increment.back()[i]));
    CHECK(worst <= 1e-3);
}

TEST_CASE("no entrance for the plain linear rate: increments grow") {
    const Mechanism m(0.0, 0.5, LevyMeasure::zero()); // pure exponential decay
    SimConfig cfg = base_cfg();
    cfg.t_max = 1.0;
    const std::vector<double> grid = {1e2, 1e3, 1e4};
    const auto rep = simulate_from_infinity(m, DriftSpec::none(), cfg, grid, 0.1, 1e-3, 1);
    CHECK_FALSE(rep.stabilized);
    CHECK_FALSE(rep.cdi_certified);
}

TEST_CASE("explosion by heavy jumps, none under a quadratic drift") {
    const LevyMeasure heavy = LevyMeasure::pareto_log_tail(0.5, 0.0, 1.0, 1.0);
    const Mechanism m(0.0, 0.0, heavy);
    SimConfig cfg = base_cfg();
    cfg.dt = 1e-2;
    cfg.t_max = 2.0;
    cfg.x_explode = 1e9;
    int exploded = 0;
    const int n = 200;
    std::vector<char> hit(n, 0);
    parallel_for(n, 4, [&](std::size_t i) {
        hit[i] = simulate_path(m, DriftSpec::none(), 1.0, cfg, i).exploded() ? 1 : 0;
    });
    for (char h : hit) exploded += h;
    CHECK(exploded > n / 2);

    // exploded records hold the sentinel after the crossing, and any level
    // below the cap is passed upward no later than the explosion time
    bool saw_exploded = false;
    for (int i = 0; i < n && !saw_exploded; ++i) {
        const PassageProbe probe{1e6, Direction::Above};
        const auto rec =
            simulate_path(m, DriftSpec::none(), 1.0, cfg, i, std::span(&probe, 1));
        if (!rec.exploded()) continue;
        saw_exploded = true;
        for (size_t k = 0; k < rec.times.size(); ++k)
            if (rec.times[k] >= rec.status_time)
                CHECK(std::isinf(rec.values[k]));
        const auto tau = first_passage(rec, 1e6, Direction::Above);
        REQUIRE(tau.has_value());
        CHECK(*tau <= rec.status_time + 1e-12);
    }
    CHECK(saw_exploded);

    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    std::fill(hit.begin(), hit.end(), 0);
    parallel_for(n, 4, [&](std::size_t i) {
        hit[i] = simulate_path(m, d, 1.0, cfg, i).exploded() ? 1 : 0;
    });
    exploded = 0;
    for (char h : hit) exploded += h;
    CHECK(exploded == 0);
}

TEST_CASE("record invariants") {
    const Mechanism m(1.0, 2.0, LevyMeasure::zero());
    SimConfig cfg = base_cfg();
    cfg.t_max = 4.0;
    const auto rec = simulate_path(m, DriftSpec::none(), 0.05, cfg, 3);
    for (size_t i = 1; i < rec.times.size(); ++i)
        CHECK(rec.times[i] > rec.times[i - 1]);
    for (double v : rec.values) CHECK(v >= 0.0);
    if (rec.extinct()) {
        bool after = false;
        for (size_t i = 0; i < rec.times.size(); ++i) {
            if (rec.times[i] >= rec.status_time) after = true;
            if (after) CHECK(rec.values[i] == 0.0);
        }
    }
}

TEST_CASE("threads do not change coupled results") {
    const Mechanism m(1.0, 0.0, LevyMeasure::point_mass(2.0, 0.5));
    const auto d = DriftSpec::logistic(1.0);
    SimConfig cfg = base_cfg();
    cfg.t_max = 0.5;
    cfg.n_paths = 8;
    const std::vector<double> grid = {1.0, 2.0, 4.0};
    const auto r1 = simulate_from_infinity(m, d, cfg, grid, 0.1, 1e-3, 1);
    const auto r4 = simulate_from_infinity(m, d, cfg, grid, 0.1, 1e-3, 4);
    REQUIRE(r1.mean_increment.size() == r4.mean_increment.size());
    for (size_t k = 0; k < r1.mean_increment.size(); ++k)
        for (size_t i = 0; i < r1.mean_increment[k].size(); ++i)
            CHECK(r1.mean_increment[k][i] == r4.mean_increment[k][i]);
}
