#pragma once

#include <optional>
#include <span>

#include "cbdi/drift.hpp"
#include "cbdi/mechanism.hpp"
#include "cbdi/path.hpp"

namespace cbdi {

/// Monte Carlo passage-time estimate. A censored fraction above zero marks
/// the mean as a lower bound; all-censored runs report the infinite flag
/// with the censoring horizon.
struct PassageEstimate {
    double level = 0.0;
    Direction dir = Direction::Below;
    bool infinite_flag = false; // every path censored
    double mean = 0.0;          // lower bound when censored_fraction > 0
    double stderr_ = 0.0;
    double censored_fraction = 0.0;
    double horizon = 0.0; // t_max actually used
    long n = 0;
};

/// First time the recorded path satisfies the threshold; linear interpolation
/// inside the crossing step for the continuous part, jumps cross at the jump
/// time. Uses in-simulation tracking when the record carries it.
std::optional<double> first_passage(const PathRecord& p, double level, Direction dir);

/// Ensemble mean passage time from x0 through `level`. Re-runs with a doubled
/// horizon (up to `max_doublings`) while more than 1% of paths are censored.
PassageEstimate mean_hitting(const Mechanism& m, const DriftSpec& d, double x0,
                             double level, Direction dir, const SimConfig& cfg,
                             int threads = 1, int max_doublings = 3);

/// Coupled certificate for entrance from large initial values: mean passage
/// times below `level` along x_grid under shared noise. The sequence must be
/// nondecreasing within Monte Carlo tolerance (coupling violation throws);
/// saturation compares the last increment against its combined error.
struct CdiCertificate {
    std::vector<double> x_grid;
    std::vector<PassageEstimate> estimates;
    double last_increment = 0.0;
    double last_increment_err = 0.0; // 3 combined standard errors
    bool saturated = false;
    bool any_explosion = false;
};

CdiCertificate cdi_certificate(const Mechanism& m, const DriftSpec& d,
                               const SimConfig& cfg, std::span<const double> x_grid,
                               double level, int threads = 1);

/// Fraction of paths reaching the explosion cap before t_max, reported at the
/// configured cap and at ten times it, with a one-sided exact upper bound for
/// the zero-hit case.
struct ExplosionProbe {
    struct Leg {
        double cap = 0.0;
        double fraction = 0.0;
        double stderr_ = 0.0;
        long hits = 0;
        long n = 0;
        double upper_bound_995 = 1.0; // Clopper-Pearson upper, 99.5% one-sided
    };
    Leg base, widened;
    double relative_change = 0.0;
};

ExplosionProbe explosion_probe(const Mechanism& m, const DriftSpec& d, double x0,
                               const SimConfig& cfg, int threads = 1);

} // namespace cbdi
