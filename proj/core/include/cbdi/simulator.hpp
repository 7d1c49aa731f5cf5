#pragma once

#include <span>

#include "cbdi/drift.hpp"
#include "cbdi/mechanism.hpp"
#include "cbdi/path.hpp"

namespace cbdi {

/// Euler scheme with compensated mid-range jumps, thinned large jumps and an
/// optional variance-matched Gaussian proxy for the sub-eps activity. Substeps
/// halve internally near high jump rates or stiff drift. Deterministic given
/// (cfg.seed, path_index).
PathRecord simulate_path(const Mechanism& m, const DriftSpec& d, double x0,
                         const SimConfig& cfg, uint64_t path_index = 0,
                         std::span<const PassageProbe> probes = {});

/// Paths from strictly increasing initial values driven by one shared noise
/// realization: jump marks thinned against each path's current state, shared
/// Gaussian cell increments. Pathwise monotone for sigma = 0 by construction.
std::vector<PathRecord> simulate_coupled(const Mechanism& m, const DriftSpec& d,
                                         std::span<const double> initials,
                                         const SimConfig& cfg, uint64_t bundle_index = 0,
                                         std::span<const PassageProbe> probes = {});

/// Same with a second drift: path j uses drifts[j]. Initial values are all
/// x0; with drifts ordered upward the paths order downward.
std::vector<PathRecord> simulate_coupled_drifts(const Mechanism& m,
                                                std::span<const DriftSpec> drifts,
                                                double x0, const SimConfig& cfg,
                                                uint64_t bundle_index = 0,
                                                std::span<const PassageProbe> probes = {});

/// Large-initial-value envelope: coupled bundles over x_grid, per-time mean
/// increments between consecutive grid levels and the sup over [t_probe,
/// t_max] of |e^{-X_{k+1}} - e^{-X_k}|. Stabilization means that at every
/// probe time the increments shrink along the grid and the geometric
/// remainder past the top level stays below tol relative to the state.
struct EnvelopeReport {
    std::vector<double> x_grid;
    std::vector<double> times;
    std::vector<std::vector<double>> mean_increment; // [pair][time]
    std::vector<double> rho_sup;                     // [pair]
    bool stabilized = false;
    double increment_tol = 1e-3;
    double t_probe = 0.0;
    bool any_explosion = false;
    bool cdi_certified = false; // else exploratory
    std::vector<PathRecord> sample_paths; // ensemble 0
};

EnvelopeReport simulate_from_infinity(const Mechanism& m, const DriftSpec& d,
                                      const SimConfig& cfg,
                                      std::span<const double> x_grid, double t_probe,
                                      double increment_tol = 1e-3, int threads = 1);

} // namespace cbdi
