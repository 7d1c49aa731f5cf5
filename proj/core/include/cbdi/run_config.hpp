#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cbdi/drift.hpp"
#include "cbdi/mechanism.hpp"
#include "cbdi/path.hpp"
#include "cbdi/toml_lite.hpp"

namespace cbdi {

struct LevyParams {
    std::string family = "zero"; // zero | point_mass | pareto_log_tail | tabulated
    double h0 = 0.0, rate = 0.0;
    double alpha = 0.0, beta = 0.0, c = 0.0, u0 = 1.0;
    bool has_small = false;
    double small_c = 0.0, small_alpha = 0.0;
    std::vector<double> knots_u, knots_tail;

    LevyMeasure build() const;
};

struct DriftParams {
    std::string family = "linear"; // powerlog | logistic | linear | zero
    double c = 1.0, alpha_hat = 1.0, beta_hat = 0.0, z0 = 0.0;
    double a = 0.0;
    std::optional<double> kappa;

    DriftSpec build() const;
};

struct ClassifyExp {
    bool with_lyapunov = false;
};
struct LyapunovExp {
    double grid_lo = 0.0; // 0: max(kappa, 1)
    double grid_hi = 1e8;
    double ratio_log2 = 0.25;
};
struct SimulateExp {
    double x0 = 1.0;
};
struct CompareExp {
    std::string mode = "cp1"; // cp1 | cp2 | from_infinity
    std::vector<double> initials;
    double x0 = 1.0; // cp2 common start
    std::vector<double> x_grid;
    double t_probe = 0.1;
    double increment_tol = 1e-3;
};
struct HittingExp {
    double x0 = 1.0;
    double level = 0.0;
    std::string direction = "below";
};
struct CdiExp {
    std::vector<double> x_grid;
    double level = 1.0;
};
struct ExplodeExp {
    double x0 = 1.0;
};

using Experiment = std::variant<ClassifyExp, LyapunovExp, SimulateExp, CompareExp,
                                HittingExp, CdiExp, ExplodeExp>;

/// One flat config per run. The canonical text re-emits every resolved value
/// (defaults included), so feeding it back reproduces the run byte for byte.
struct RunConfig {
    std::string subcommand;
    LevyParams levy;
    double sigma = 0.0;
    double gamma = 0.0;
    DriftParams drift;
    std::optional<DriftParams> drift2;
    SimConfig sim;
    Experiment experiment;
    std::string out_format = "json"; // csv | json | bin
    std::string out_path;            // empty: stdout

    static RunConfig load(const toml::Document& doc, const std::string& subcommand);

    Mechanism mechanism() const;
    DriftSpec drift_spec() const;

    std::string canonical_toml() const;
    uint64_t config_hash() const; // FNV-1a over the canonical text
};

uint64_t fnv1a64(const std::string& s);

} // namespace cbdi
