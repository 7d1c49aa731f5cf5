#include "cbdi/run_config.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "cbdi/errors.hpp"

namespace cbdi {

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_array(const std::vector<double>& v) {
    std::string s = "[";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt(v[i]);
    }
    return s + "]";
}

LevyParams load_levy(const toml::Document& doc) {
    LevyParams lp;
    lp.family = doc.opt_string("mechanism", "levy.family").value_or("zero");
    if (lp.family == "zero") {
        // nothing more
    } else if (lp.family == "point_mass") {
        lp.h0 = doc.get_number("mechanism", "levy.h0");
        lp.rate = doc.get_number("mechanism", "levy.rate");
    } else if (lp.family == "pareto_log_tail") {
        lp.alpha = doc.get_number("mechanism", "levy.alpha");
        lp.beta = doc.opt_number("mechanism", "levy.beta").value_or(0.0);
        lp.c = doc.get_number("mechanism", "levy.c");
        lp.u0 = doc.opt_number("mechanism", "levy.u0").value_or(1.0);
        if (doc.has("mechanism", "levy.small.c")) {
            lp.has_small = true;
            lp.small_c = doc.get_number("mechanism", "levy.small.c");
            lp.small_alpha = doc.get_number("mechanism", "levy.small.alpha");
        }
    } else if (lp.family == "tabulated") {
        lp.knots_u = doc.get_number_array("mechanism", "levy.knots_u");
        lp.knots_tail = doc.get_number_array("mechanism", "levy.knots_tail");
        if (lp.knots_u.size() != lp.knots_tail.size())
            throw config_error("levy.knots_u and levy.knots_tail must have equal length");
    } else {
        throw config_error("unknown levy.family '" + lp.family + "'");
    }
    return lp;
}

DriftParams load_drift(const toml::Document& doc, const std::string& section) {
    DriftParams dp;
    dp.family = doc.get_string(section, "family");
    if (dp.family == "powerlog") {
        dp.c = doc.get_number(section, "c");
        dp.alpha_hat = doc.get_number(section, "alpha_hat");
        dp.beta_hat = doc.opt_number(section, "beta_hat").value_or(0.0);
        dp.z0 = doc.opt_number(section, "z0").value_or(0.0);
    } else if (dp.family == "logistic") {
        dp.c = doc.get_number(section, "c");
    } else if (dp.family == "linear") {
        dp.a = doc.get_number(section, "a");
    } else if (dp.family == "zero") {
        dp.a = 0.0;
    } else {
        throw config_error("unknown drift family '" + dp.family + "' in [" + section +
                           "]");
    }
    dp.kappa = doc.opt_number(section, "kappa");
    return dp;
}

} // namespace

LevyMeasure LevyParams::build() const {
    if (family == "zero") return LevyMeasure::zero();
    if (family == "point_mass") return LevyMeasure::point_mass(h0, rate);
    if (family == "pareto_log_tail") {
        std::optional<SmallJumpPart> small;
        if (has_small) small = SmallJumpPart{small_c, small_alpha};
        return LevyMeasure::pareto_log_tail(alpha, beta, c, u0, small);
    }
    if (family == "tabulated") {
        std::vector<std::pair<double, double>> knots;
        for (size_t i = 0; i < knots_u.size(); ++i)
            knots.emplace_back(knots_u[i], knots_tail[i]);
        return LevyMeasure::tabulated(std::move(knots));
    }
    throw config_error("unknown levy family '" + family + "'");
}

DriftSpec DriftParams::build() const {
    DriftSpec d = DriftSpec::none();
    if (family == "powerlog")
        d = DriftSpec::power_log(c, alpha_hat, beta_hat, z0);
    else if (family == "logistic")
        d = DriftSpec::logistic(c);
    else if (family == "linear")
        d = DriftSpec::linear(a);
    else if (family == "zero")
        d = DriftSpec::none();
    else
        throw config_error("unknown drift family '" + family + "'");
    if (kappa) d = d.with_kappa(*kappa);
    return d;
}

RunConfig RunConfig::load(const toml::Document& doc, const std::string& subcommand) {
    RunConfig rc;
    rc.subcommand = subcommand;

    if (!doc.has_section("mechanism"))
        throw config_error("missing [mechanism] section");
    rc.sigma = doc.opt_number("mechanism", "sigma").value_or(0.0);
    rc.gamma = doc.opt_number("mechanism", "gamma").value_or(0.0);
    rc.levy = load_levy(doc);

    if (!doc.has_section("drift"))
        throw config_error("missing [drift] section (key drift.family)");
    rc.drift = load_drift(doc, "drift");
    if (doc.has_section("drift2")) rc.drift2 = load_drift(doc, "drift2");

    SimConfig& s = rc.sim;
    // passage estimators default to a long censoring horizon
    if (subcommand == "hitting" || subcommand == "cdi") s.t_max = 50.0;
    s.dt = doc.opt_number("sim", "dt").value_or(s.dt);
    s.eps_jump = doc.opt_number("sim", "eps_jump").value_or(s.eps_jump);
    s.gaussian_small_jumps =
        doc.opt_bool("sim", "gaussian_small_jumps").value_or(s.gaussian_small_jumps);
    s.x_explode = doc.opt_number("sim", "x_explode").value_or(s.x_explode);
    s.t_max = doc.opt_number("sim", "t_max").value_or(s.t_max);
    if (auto v = doc.opt_number("sim", "seed")) s.seed = static_cast<uint64_t>(*v);
    if (auto v = doc.opt_number("sim", "n_paths")) s.n_paths = static_cast<long>(*v);
    s.coupling_cells = doc.opt_number("sim", "coupling_cells").value_or(s.coupling_cells);
    if (auto v = doc.opt_number("sim", "max_record_points"))
        s.max_record_points = static_cast<long>(*v);
    s.stiffness_cap = doc.opt_number("sim", "stiffness_cap").value_or(s.stiffness_cap);

    const std::string X = "experiment";
    if (subcommand == "classify") {
        ClassifyExp e;
        e.with_lyapunov = doc.opt_bool(X, "with_lyapunov").value_or(false);
        rc.experiment = e;
    } else if (subcommand == "lyapunov") {
        LyapunovExp e;
        e.grid_lo = doc.opt_number(X, "grid_lo").value_or(0.0);
        e.grid_hi = doc.opt_number(X, "grid_hi").value_or(1e8);
        e.ratio_log2 = doc.opt_number(X, "ratio_log2").value_or(0.25);
        rc.experiment = e;
    } else if (subcommand == "simulate") {
        SimulateExp e;
        e.x0 = doc.opt_number(X, "x0").value_or(1.0);
        rc.experiment = e;
    } else if (subcommand == "compare") {
        CompareExp e;
        e.mode = doc.opt_string(X, "mode").value_or("cp1");
        if (e.mode == "cp1") {
            e.initials = doc.get_number_array(X, "initials");
        } else if (e.mode == "cp2") {
            e.x0 = doc.get_number(X, "x0");
        } else if (e.mode == "from_infinity") {
            e.x_grid = doc.opt_number_array(X, "x_grid")
                           .value_or(std::vector<double>{1e2, 1e3, 1e4, 1e5, 1e6});
            e.t_probe = doc.opt_number(X, "t_probe").value_or(0.1);
            e.increment_tol = doc.opt_number(X, "increment_tol").value_or(1e-3);
        } else {
            throw config_error("unknown compare mode '" + e.mode + "'");
        }
        rc.experiment = e;
    } else if (subcommand == "hitting") {
        HittingExp e;
        e.x0 = doc.get_number(X, "x0");
        e.level = doc.get_number(X, "level");
        e.direction = doc.opt_string(X, "direction").value_or("below");
        if (e.direction != "below" && e.direction != "above")
            throw config_error("experiment.direction must be 'below' or 'above'");
        rc.experiment = e;
    } else if (subcommand == "cdi") {
        CdiExp e;
        e.x_grid = doc.opt_number_array(X, "x_grid")
                       .value_or(std::vector<double>{1e2, 1e3, 1e4, 1e5, 1e6});
        e.level = doc.get_number(X, "level");
        rc.experiment = e;
    } else if (subcommand == "explode") {
        ExplodeExp e;
        e.x0 = doc.get_number(X, "x0");
        rc.experiment = e;
    } else {
        throw config_error("unknown subcommand '" + subcommand + "'");
    }

    if (doc.has_section("output")) {
        rc.out_format = doc.opt_string("output", "format").value_or(rc.out_format);
        rc.out_path = doc.opt_string("output", "path").value_or("");
    }
    if (rc.out_format != "csv" && rc.out_format != "json" && rc.out_format != "bin")
        throw config_error("output.format must be csv, json or bin");

    const auto leftovers = doc.unconsumed();
    if (!leftovers.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : leftovers) msg += " " + k;
        throw config_error(msg);
    }

    // Validate eagerly so config mistakes surface as config errors.
    rc.mechanism();
    rc.drift_spec();
    if (rc.drift2) rc.drift2->build();
    rc.sim.validate();
    return rc;
}

Mechanism RunConfig::mechanism() const { return Mechanism(sigma, gamma, levy.build()); }

DriftSpec RunConfig::drift_spec() const { return drift.build(); }

namespace {

void emit_drift(std::ostringstream& os, const std::string& section,
                const DriftParams& dp) {
    os << "[" << section << "]\n";
    os << "family = \"" << dp.family << "\"\n";
    if (dp.family == "powerlog") {
        os << "c = " << fmt(dp.c) << "\n";
        os << "alpha_hat = " << fmt(dp.alpha_hat) << "\n";
        os << "beta_hat = " << fmt(dp.beta_hat) << "\n";
        os << "z0 = " << fmt(dp.z0) << "\n";
    } else if (dp.family == "logistic") {
        os << "c = " << fmt(dp.c) << "\n";
    } else if (dp.family == "linear") {
        os << "a = " << fmt(dp.a) << "\n";
    }
    if (dp.kappa) os << "kappa = " << fmt(*dp.kappa) << "\n";
}

} // namespace

std::string RunConfig::canonical_toml() const {
    std::ostringstream os;
    os << "[mechanism]\n";
    os << "sigma = " << fmt(sigma) << "\n";
    os << "gamma = " << fmt(gamma) << "\n";
    os << "levy.family = \"" << levy.family << "\"\n";
    if (levy.family == "point_mass") {
        os << "levy.h0 = " << fmt(levy.h0) << "\n";
        os << "levy.rate = " << fmt(levy.rate) << "\n";
    } else if (levy.family == "pareto_log_tail") {
        os << "levy.alpha = " << fmt(levy.alpha) << "\n";
        os << "levy.beta = " << fmt(levy.beta) << "\n";
        os << "levy.c = " << fmt(levy.c) << "\n";
        os << "levy.u0 = " << fmt(levy.u0) << "\n";
        if (levy.has_small) {
            os << "levy.small.c = " << fmt(levy.small_c) << "\n";
            os << "levy.small.alpha = " << fmt(levy.small_alpha) << "\n";
        }
    } else if (levy.family == "tabulated") {
        os << "levy.knots_u = " << fmt_array(levy.knots_u) << "\n";
        os << "levy.knots_tail = " << fmt_array(levy.knots_tail) << "\n";
    }

    emit_drift(os, "drift", drift);
    if (drift2) emit_drift(os, "drift2", *drift2);

    os << "[sim]\n";
    os << "dt = " << fmt(sim.dt) << "\n";
    os << "eps_jump = " << fmt(sim.eps_jump) << "\n";
    os << "gaussian_small_jumps = " << (sim.gaussian_small_jumps ? "true" : "false")
       << "\n";
    os << "x_explode = " << fmt(sim.x_explode) << "\n";
    os << "t_max = " << fmt(sim.t_max) << "\n";
    os << "seed = " << sim.seed << "\n";
    os << "n_paths = " << sim.n_paths << "\n";
    os << "coupling_cells = " << fmt(sim.coupling_cells) << "\n";
    os << "max_record_points = " << sim.max_record_points << "\n";
    os << "stiffness_cap = " << fmt(sim.stiffness_cap) << "\n";

    os << "[experiment]\n";
    std::visit(
        [&](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, ClassifyExp>) {
                os << "with_lyapunov = " << (e.with_lyapunov ? "true" : "false") << "\n";
            } else if constexpr (std::is_same_v<T, LyapunovExp>) {
                os << "grid_lo = " << fmt(e.grid_lo) << "\n";
                os << "grid_hi = " << fmt(e.grid_hi) << "\n";
                os << "ratio_log2 = " << fmt(e.ratio_log2) << "\n";
            } else if constexpr (std::is_same_v<T, SimulateExp>) {
                os << "x0 = " << fmt(e.x0) << "\n";
            } else if constexpr (std::is_same_v<T, CompareExp>) {
                os << "mode = \"" << e.mode << "\"\n";
                if (e.mode == "cp1") os << "initials = " << fmt_array(e.initials) << "\n";
                if (e.mode == "cp2") os << "x0 = " << fmt(e.x0) << "\n";
                if (e.mode == "from_infinity") {
                    os << "x_grid = " << fmt_array(e.x_grid) << "\n";
                    os << "t_probe = " << fmt(e.t_probe) << "\n";
                    os << "increment_tol = " << fmt(e.increment_tol) << "\n";
                }
            } else if constexpr (std::is_same_v<T, HittingExp>) {
                os << "x0 = " << fmt(e.x0) << "\n";
                os << "level = " << fmt(e.level) << "\n";
                os << "direction = \"" << e.direction << "\"\n";
            } else if constexpr (std::is_same_v<T, CdiExp>) {
                os << "x_grid = " << fmt_array(e.x_grid) << "\n";
                os << "level = " << fmt(e.level) << "\n";
            } else if constexpr (std::is_same_v<T, ExplodeExp>) {
                os << "x0 = " << fmt(e.x0) << "\n";
            }
        },
        experiment);

    // The destination path is an execution detail (like the worker count):
    // it stays out of the canonical text so identical runs hash identically.
    os << "[output]\n";
    os << "format = \"" << out_format << "\"\n";
    return os.str();
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t RunConfig::config_hash() const { return fnv1a64(canonical_toml()); }

} // namespace cbdi
