#include "cbdi/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "cbdi/classifier.hpp"
#include "cbdi/errors.hpp"
#include "cbdi/generator.hpp"
#include "cbdi/output.hpp"
#include "cbdi/parallel.hpp"
#include "cbdi/passage.hpp"
#include "cbdi/run_config.hpp"
#include "cbdi/simulator.hpp"
#include "cbdi/version.hpp"

namespace cbdi {

namespace {

struct CliArgs {
    std::string subcommand;
    std::string config_path;
    std::string out_path;   // overrides config
    std::string format;     // overrides config
    int threads = 1;
    std::optional<uint64_t> seed;
};

const char* kUsage =
    "usage: cbdi <classify|lyapunov|simulate|compare|hitting|cdi|explode>\n"
    "            --config <file> [--out <file>] [--format csv|json|bin]\n"
    "            [--threads N] [--seed S]\n";

CliArgs parse_args(int argc, const char* const* argv) {
    CliArgs a;
    if (argc < 2) throw config_error(std::string("missing subcommand\n") + kUsage);
    a.subcommand = argv[1];
    for (int i = 2; i < argc; ++i) {
        const std::string flag = argv[i];
        auto need = [&](const char* name) -> std::string {
            if (i + 1 >= argc)
                throw config_error(std::string(name) + " needs an argument");
            return argv[++i];
        };
        if (flag == "--config")
            a.config_path = need("--config");
        else if (flag == "--out")
            a.out_path = need("--out");
        else if (flag == "--format")
            a.format = need("--format");
        else if (flag == "--threads")
            a.threads = std::stoi(need("--threads"));
        else if (flag == "--seed")
            a.seed = static_cast<uint64_t>(std::stoull(need("--seed")));
        else if (flag == "--help" || flag == "-h")
            throw config_error(kUsage);
        else
            throw config_error("unknown flag '" + flag + "'\n" + kUsage);
    }
    if (a.config_path.empty()) throw config_error("--config is required");
    if (a.threads < 1) throw config_error("--threads must be >= 1");
    return a;
}

struct Sink {
    std::unique_ptr<std::ofstream> file;
    std::ostream* os = nullptr;
    bool to_stdout = false;

    static Sink open(const std::string& path, bool binary = false) {
        Sink s;
        if (path.empty()) {
            s.os = &std::cout;
            s.to_stdout = true;
            return s;
        }
        auto mode = binary ? std::ios::binary | std::ios::out : std::ios::out;
        s.file = std::make_unique<std::ofstream>(path, mode);
        if (!*s.file) throw config_error("cannot open output file: " + path);
        s.os = s.file.get();
        return s;
    }
};

void integral_json(JsonWriter& w, const char* name, const IntegralValue& v) {
    w.key(name).begin_object();
    switch (v.kind) {
        case IntegralValue::Kind::Finite:
            w.kv("finite", true).kv("value", v.value).kv("residual", v.residual);
            break;
        case IntegralValue::Kind::Infinite:
            w.kv("finite", false);
            break;
        case IntegralValue::Kind::Undecidable:
            w.key("finite").null();
            w.kv("note", v.note);
            break;
    }
    w.end_object();
}

void check_json(JsonWriter& w, const char* name, const CheckOutcome& c) {
    w.key(name).begin_object();
    w.kv("pass", c.pass);
    if (!c.pass) {
        w.kv("reason", c.reason);
        if (c.witness) w.kv("witness", *c.witness);
    }
    w.end_object();
}

const char* verdict_str(Verdict v) {
    return v == Verdict::Guaranteed ? "guaranteed" : "inconclusive";
}

int cmd_classify(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const ClassificationReport rep = classify(mech, drift);

    const auto& exp = std::get<ClassifyExp>(rc.experiment);
    std::optional<TheoremAVerdict> tv;
    if (exp.with_lyapunov) tv = theorem_A_verdict(mech, drift);

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    w.key("report").begin_object();
    w.kv("kappa", rep.kappa);
    integral_json(w, "integral_I", rep.integral_I);
    integral_json(w, "integral_J", rep.integral_J);
    integral_json(w, "flow_integral", rep.flow);
    check_json(w, "b1", rep.b1);
    check_json(w, "b2", rep.b2);
    w.key("b3").begin_object();
    w.kv("pass", rep.b3.pass);
    if (rep.b3.pass) w.kv("b", rep.b3.b);
    else w.kv("reason", rep.b3.reason);
    w.end_object();
    w.kv("verdict_nonexplosion", verdict_str(rep.nonexplosion));
    w.kv("verdict_cdi", verdict_str(rep.cdi));
    w.key("table_rows").begin_array();
    for (const auto& r : rep.table_rows) w.value(r);
    w.end_array();
    w.kv("used_drift_comparison", rep.used_drift_comparison);
    if (rep.used_drift_comparison) w.kv("comparison_note", rep.comparison_note);
    w.end_object();
    if (tv) {
        // Threshold certified by the second Lyapunov scan: a usable stand-in
        // for the existential level in the passage-time statement.
        w.key("lyapunov").begin_object();
        w.key("f1").begin_object();
        w.kv("certified", tv->f1.certified);
        if (tv->f1.certified) w.kv("M", tv->f1.M).kv("c", tv->f1.c);
        w.end_object();
        w.key("f2").begin_object();
        w.kv("certified", tv->f2.certified);
        if (tv->f2.certified) w.kv("M", tv->f2.M).kv("c", tv->f2.c);
        w.end_object();
        if (tv->kind == TheoremAKind::CDI) {
            w.key("x0_stand_in").begin_object();
            w.kv("source", "lyapunov_m2");
            w.kv("value", tv->x0);
            w.end_object();
        }
        w.end_object();
    }
    w.end_object();

    Sink sink = Sink::open(rc.out_path);
    *sink.os << w.str() << "\n";

    // Human-readable table; kept off stdout when the JSON goes there.
    std::ostream& tbl = sink.to_stdout ? std::cerr : std::cout;
    tbl << "kappa                : " << rep.kappa << "\n";
    tbl << "B1 / B2 / B3         : " << (rep.b1.pass ? "pass" : "FAIL") << " / "
        << (rep.b2.pass ? "pass" : "FAIL") << " / "
        << (rep.b3.pass ? "pass" : "FAIL") << "\n";
    auto show = [&](const char* n, const IntegralValue& v) {
        tbl << n;
        switch (v.kind) {
            case IntegralValue::Kind::Finite: tbl << v.value; break;
            case IntegralValue::Kind::Infinite: tbl << "inf"; break;
            case IntegralValue::Kind::Undecidable: tbl << "undecidable"; break;
        }
        tbl << "\n";
    };
    show("integral_I           : ", rep.integral_I);
    show("integral_J           : ", rep.integral_J);
    show("flow_integral        : ", rep.flow);
    tbl << "non-explosion        : " << verdict_str(rep.nonexplosion) << "\n";
    tbl << "come-down-from-inf   : " << verdict_str(rep.cdi) << "\n";
    if (!rep.table_rows.empty()) {
        tbl << "regime rows          :";
        for (const auto& r : rep.table_rows) tbl << " " << r;
        tbl << "\n";
    }
    (void)args;
    return 0;
}

int cmd_lyapunov(const RunConfig& rc, const Provenance& prov, const CliArgs&) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<LyapunovExp>(rc.experiment);
    MarginGrid grid{exp.grid_lo, exp.grid_hi, exp.ratio_log2};

    const MarginReport f1 = lyapunov_margin(mech, drift, LyapunovWhich::F1, grid);
    const MarginReport f2 = lyapunov_margin(mech, drift, LyapunovWhich::F2, grid);

    if (rc.out_format == "json") {
        JsonWriter w;
        w.begin_object();
        provenance_json(w, prov);
        auto emit = [&](const char* name, const MarginReport& r) {
            w.key(name).begin_object();
            w.kv("certified", r.certified);
            if (r.certified) w.kv("M", r.M).kv("c", r.c);
            else w.kv("reason", r.reason);
            w.key("curve").begin_array();
            for (const auto& pt : r.curve) {
                w.begin_object();
                w.kv("z", pt.z).kv("xf", pt.xf).kv("eps", pt.eps);
                w.end_object();
            }
            w.end_array();
            w.end_object();
        };
        emit("f1", f1);
        emit("f2", f2);
        w.end_object();
        Sink sink = Sink::open(rc.out_path);
        *sink.os << w.str() << "\n";
        return 0;
    }

    Sink sink = Sink::open(rc.out_path);
    provenance_csv_header(*sink.os, prov);
    *sink.os << "z,Xf1,Xf2,eps1,eps2\n";
    const size_t n = std::max(f1.curve.size(), f2.curve.size());
    for (size_t i = 0; i < n; ++i) {
        const double z = i < f1.curve.size() ? f1.curve[i].z
                                             : f2.curve[i].z;
        auto cell = [&](const MarginReport& r, bool want_xf) {
            if (i >= r.curve.size()) return std::string("nan");
            return csv_double(want_xf ? r.curve[i].xf : r.curve[i].eps);
        };
        *sink.os << csv_double(z) << ',' << cell(f1, true) << ',' << cell(f2, true)
                 << ',' << cell(f1, false) << ',' << cell(f2, false) << "\n";
    }
    return 0;
}

int cmd_simulate(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<SimulateExp>(rc.experiment);

    std::vector<PathRecord> paths(rc.sim.n_paths);
    parallel_for(rc.sim.n_paths, args.threads, [&](std::size_t i) {
        paths[i] = simulate_path(mech, drift, exp.x0, rc.sim, i);
    });

    long extinct = 0, exploded = 0;
    double sum = 0.0, sum2 = 0.0;
    long alive_n = 0;
    for (const auto& p : paths) {
        if (p.extinct()) ++extinct;
        else if (p.exploded()) ++exploded;
        const double v = p.values.back();
        if (!std::isinf(v)) {
            sum += v;
            sum2 += v * v;
            ++alive_n;
        }
    }
    const double mean = alive_n ? sum / alive_n : 0.0;
    const double sd =
        alive_n > 1 ? std::sqrt(std::max(0.0, (sum2 - alive_n * mean * mean) /
                                                  (alive_n - 1)))
                    : 0.0;

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    w.key("summary").begin_object();
    w.kv("n_paths", rc.sim.n_paths);
    w.kv("x0", exp.x0);
    w.kv("extinct", extinct);
    w.kv("exploded", exploded);
    w.kv("final_mean_excl_exploded", mean);
    w.kv("final_sd_excl_exploded", sd);
    w.end_object();
    w.end_object();

    if (rc.out_format == "csv") {
        Sink sink = Sink::open(rc.out_path);
        write_paths_csv(*sink.os, paths, prov);
        if (!sink.to_stdout) std::cout << w.str() << "\n";
    } else if (rc.out_format == "bin") {
        Sink sink = Sink::open(rc.out_path, true);
        write_paths_binary(*sink.os, paths, prov);
        if (!sink.to_stdout) std::cout << w.str() << "\n";
    } else {
        Sink sink = Sink::open(rc.out_path);
        *sink.os << w.str() << "\n";
    }
    return 0;
}

int cmd_compare(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<CompareExp>(rc.experiment);

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    w.kv("mode", exp.mode);

    if (exp.mode == "from_infinity") {
        const EnvelopeReport rep =
            simulate_from_infinity(mech, drift, rc.sim, exp.x_grid, exp.t_probe,
                                   exp.increment_tol, args.threads);
        w.kv("label", rep.cdi_certified ? "certified" : "exploratory");
        w.kv("stabilized", rep.stabilized);
        w.kv("any_explosion", rep.any_explosion);
        w.key("x_grid").number_array(rep.x_grid);
        w.key("rho_sup").number_array(rep.rho_sup);
        w.key("times").number_array(rep.times);
        w.key("mean_increment").begin_array();
        for (const auto& row : rep.mean_increment) w.number_array(row);
        w.end_array();
        w.end_object();
        Sink sink = Sink::open(rc.out_path);
        *sink.os << w.str() << "\n";
        return 0;
    }

    long violations = 0;
    double worst_gap = 0.0;
    const long n_bundles = rc.sim.n_paths;
    std::vector<long> vio(n_bundles, 0);
    std::vector<double> gap(n_bundles, 0.0);

    if (exp.mode == "cp1") {
        if (exp.initials.size() < 2)
            throw config_error("compare cp1 needs at least two initials");
        parallel_for(n_bundles, args.threads, [&](std::size_t b) {
            const auto bundle = simulate_coupled(mech, drift, exp.initials, rc.sim, b);
            for (size_t j = 1; j < bundle.size(); ++j)
                for (size_t i = 0; i < bundle[j].times.size(); ++i) {
                    const double d = bundle[j].values[i] - bundle[j - 1].values[i];
                    if (d < 0.0) {
                        ++vio[b];
                        gap[b] = std::max(gap[b], -d);
                    }
                }
        });
    } else { // cp2
        if (!rc.drift2) throw config_error("compare cp2 needs a [drift2] section");
        const DriftSpec d2 = rc.drift2->build();
        const DriftSpec drifts[2] = {drift, d2}; // path 0: small drift, path 1: large
        parallel_for(n_bundles, args.threads, [&](std::size_t b) {
            const auto bundle =
                simulate_coupled_drifts(mech, drifts, exp.x0, rc.sim, b);
            for (size_t i = 0; i < bundle[0].times.size(); ++i) {
                const double d = bundle[0].values[i] - bundle[1].values[i];
                if (d < 0.0) { // larger drift must stay below
                    ++vio[b];
                    gap[b] = std::max(gap[b], -d);
                }
            }
        });
    }
    for (long b = 0; b < n_bundles; ++b) {
        violations += vio[b];
        worst_gap = std::max(worst_gap, gap[b]);
    }
    w.kv("bundles", n_bundles);
    w.kv("ordering_violations", violations);
    w.kv("worst_gap", worst_gap);
    w.end_object();
    Sink sink = Sink::open(rc.out_path);
    *sink.os << w.str() << "\n";
    return 0;
}

int cmd_hitting(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<HittingExp>(rc.experiment);
    const Direction dir =
        exp.direction == "below" ? Direction::Below : Direction::Above;

    const PassageEstimate est =
        mean_hitting(mech, drift, exp.x0, exp.level, dir, rc.sim, args.threads);

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    w.key("estimate").begin_object();
    w.kv("x0", exp.x0);
    w.kv("level", est.level);
    w.kv("direction", exp.direction);
    w.kv("infinite_flag", est.infinite_flag);
    w.kv("mean", est.mean);
    w.kv("stderr", est.stderr_);
    w.kv("censored_fraction", est.censored_fraction);
    w.kv("lower_bound_only", est.censored_fraction > 0.0);
    w.kv("horizon", est.horizon);
    w.kv("n", est.n);
    w.end_object();
    w.end_object();
    Sink sink = Sink::open(rc.out_path);
    *sink.os << w.str() << "\n";
    return 0;
}

int cmd_cdi(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<CdiExp>(rc.experiment);

    const CdiCertificate cert =
        cdi_certificate(mech, drift, rc.sim, exp.x_grid, exp.level, args.threads);

    if (rc.out_format == "csv") {
        Sink sink = Sink::open(rc.out_path);
        provenance_csv_header(*sink.os, prov);
        *sink.os << "x,mean_tau,stderr,censored_fraction\n";
        for (size_t i = 0; i < cert.x_grid.size(); ++i) {
            const auto& e = cert.estimates[i];
            *sink.os << csv_double(cert.x_grid[i]) << ',' << csv_double(e.mean) << ','
                     << csv_double(e.stderr_) << ',' << csv_double(e.censored_fraction)
                     << "\n";
        }
        return 0;
    }

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    w.key("certificate").begin_object();
    w.kv("level", exp.level);
    w.key("x_grid").number_array(cert.x_grid);
    w.key("mean_tau").begin_array();
    for (const auto& e : cert.estimates) w.value(e.mean);
    w.end_array();
    w.key("stderr").begin_array();
    for (const auto& e : cert.estimates) w.value(e.stderr_);
    w.end_array();
    w.key("censored_fraction").begin_array();
    for (const auto& e : cert.estimates) w.value(e.censored_fraction);
    w.end_array();
    w.kv("last_increment", cert.last_increment);
    w.kv("last_increment_err", cert.last_increment_err);
    w.kv("saturated", cert.saturated);
    w.kv("any_explosion", cert.any_explosion);
    w.end_object();
    w.end_object();
    Sink sink = Sink::open(rc.out_path);
    *sink.os << w.str() << "\n";
    return 0;
}

int cmd_explode(const RunConfig& rc, const Provenance& prov, const CliArgs& args) {
    const Mechanism mech = rc.mechanism();
    const DriftSpec drift = rc.drift_spec();
    const auto& exp = std::get<ExplodeExp>(rc.experiment);

    const ExplosionProbe probe =
        explosion_probe(mech, drift, exp.x0, rc.sim, args.threads);

    JsonWriter w;
    w.begin_object();
    provenance_json(w, prov);
    auto leg = [&](const char* name, const ExplosionProbe::Leg& l) {
        w.key(name).begin_object();
        w.kv("cap", l.cap);
        w.kv("fraction", l.fraction);
        w.kv("stderr", l.stderr_);
        w.kv("hits", l.hits);
        w.kv("n", l.n);
        w.kv("upper_bound_995", l.upper_bound_995);
        w.end_object();
    };
    leg("base", probe.base);
    leg("widened", probe.widened);
    w.kv("relative_change", probe.relative_change);
    w.end_object();
    Sink sink = Sink::open(rc.out_path);
    *sink.os << w.str() << "\n";
    return 0;
}

void print_error_json(const char* kind, const std::exception& e) {
    JsonWriter w;
    w.begin_object();
    w.key("error").begin_object();
    w.kv("kind", kind);
    w.kv("message", std::string(e.what()));
    w.end_object();
    w.end_object();
    std::cerr << w.str() << "\n";
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    try {
        const CliArgs args = parse_args(argc, argv);
        toml::Document doc = toml::Document::parse_file(args.config_path);
        RunConfig rc = RunConfig::load(doc, args.subcommand);
        if (args.seed) rc.sim.seed = *args.seed;
        if (!args.format.empty()) {
            if (args.format != "csv" && args.format != "json" && args.format != "bin")
                throw config_error("--format must be csv, json or bin");
            rc.out_format = args.format;
        }
        if (!args.out_path.empty()) rc.out_path = args.out_path;

        Provenance prov;
        prov.version = kVersion;
        prov.seed = rc.sim.seed;
        prov.config_toml = rc.canonical_toml();
        prov.config_hash = rc.config_hash();

        if (rc.subcommand == "classify") return cmd_classify(rc, prov, args);
        if (rc.subcommand == "lyapunov") return cmd_lyapunov(rc, prov, args);
        if (rc.subcommand == "simulate") return cmd_simulate(rc, prov, args);
        if (rc.subcommand == "compare") return cmd_compare(rc, prov, args);
        if (rc.subcommand == "hitting") return cmd_hitting(rc, prov, args);
        if (rc.subcommand == "cdi") return cmd_cdi(rc, prov, args);
        if (rc.subcommand == "explode") return cmd_explode(rc, prov, args);
        throw config_error("unknown subcommand '" + rc.subcommand + "'\n" + kUsage);
    } catch (const config_error& e) {
        print_error_json("config", e);
        return 2;
    } catch (const consistency_error& e) {
        print_error_json("internal_consistency", e);
        return 4;
    } catch (const numerical_error& e) {
        print_error_json("numerical_certification", e);
        return 3;
    } catch (const std::exception& e) {
        print_error_json("unexpected", e);
        return 1;
    }
}

} // namespace cbdi
