#include "cbdi/passage.hpp"

#include <algorithm>
#include <cmath>

#include "cbdi/errors.hpp"
#include "cbdi/parallel.hpp"
#include "cbdi/simulator.hpp"
#include "cbdi/special.hpp"

namespace cbdi {

std::optional<double> first_passage(const PathRecord& p, double level, Direction dir) {
    // In-simulation tracking has full substep resolution; prefer it.
    for (const auto& tr : p.tracked)
        if (tr.level == level && tr.dir == dir) return tr.hit ? std::optional(tr.time) : std::nullopt;

    if (p.values.empty()) return std::nullopt;
    const auto cross = [&](double v) {
        return dir == Direction::Below ? v <= level : v >= level;
    };
    if (cross(p.values.front())) return 0.0;

    size_t jump_i = 0;
    for (size_t i = 1; i < p.times.size(); ++i) {
        const double t0 = p.times[i - 1], t1 = p.times[i];
        const double v0 = p.values[i - 1], v1 = p.values[i];
        if (!cross(v1)) continue;
        // A jump inside this record step crosses instantaneously; otherwise
        // interpolate the continuous move.
        while (jump_i < p.jumps.size() && p.jumps[jump_i].first <= t0) ++jump_i;
        if (dir == Direction::Above && jump_i < p.jumps.size() &&
            p.jumps[jump_i].first <= t1) {
            return std::min(t1, p.jumps[jump_i].first);
        }
        if (std::isinf(v1)) return p.status_time; // explosion inside the step
        if (v1 == v0) return t1;
        const double frac = dir == Direction::Below ? (v0 - level) / (v0 - v1)
                                                    : (level - v0) / (v1 - v0);
        return t0 + (t1 - t0) * std::clamp(frac, 0.0, 1.0);
    }

    if (p.extinct() && dir == Direction::Below) return p.status_time;
    if (p.exploded() && dir == Direction::Above) return p.status_time;
    return std::nullopt;
}

namespace {

PassageEstimate estimate_from_times(const std::vector<std::optional<double>>& taus,
                                    double level, Direction dir, double horizon) {
    PassageEstimate est;
    est.level = level;
    est.dir = dir;
    est.horizon = horizon;
    est.n = static_cast<long>(taus.size());
    double sum = 0.0, sum2 = 0.0;
    long hit = 0;
    for (const auto& t : taus) {
        if (!t) continue;
        ++hit;
        sum += *t;
        sum2 += *t * *t;
    }
    est.censored_fraction = 1.0 - static_cast<double>(hit) / est.n;
    if (hit == 0) {
        est.infinite_flag = true;
        est.mean = horizon;
        return est;
    }
    est.mean = sum / hit;
    if (hit > 1) {
        const double var = std::max(0.0, (sum2 - hit * est.mean * est.mean) / (hit - 1));
        est.stderr_ = std::sqrt(var / hit);
    }
    return est;
}

} // namespace

PassageEstimate mean_hitting(const Mechanism& m, const DriftSpec& d, double x0,
                             double level, Direction dir, const SimConfig& cfg,
                             int threads, int max_doublings) {
    SimConfig run = cfg;
    for (int attempt = 0;; ++attempt) {
        const PassageProbe probe{level, dir};
        std::vector<std::optional<double>> taus(run.n_paths);
        parallel_for(run.n_paths, threads, [&](std::size_t i) {
            const PathRecord rec =
                simulate_path(m, d, x0, run, i, std::span(&probe, 1));
            taus[i] = first_passage(rec, level, dir);
        });
        PassageEstimate est = estimate_from_times(taus, level, dir, run.t_max);
        if (est.censored_fraction <= 0.01 || attempt >= max_doublings) return est;
        run.t_max *= 2.0;
    }
}

CdiCertificate cdi_certificate(const Mechanism& m, const DriftSpec& d,
                               const SimConfig& cfg, std::span<const double> x_grid,
                               double level, int threads) {
    if (x_grid.size() < 2) throw config_error("cdi_certificate needs >= 2 grid levels");
    for (double x : x_grid)
        if (!(x > level))
            throw config_error("cdi_certificate level must sit below the grid");

    CdiCertificate cert;
    cert.x_grid.assign(x_grid.begin(), x_grid.end());
    const size_t k = x_grid.size();
    const PassageProbe probe{level, Direction::Below};

    std::vector<std::vector<std::optional<double>>> taus(
        k, std::vector<std::optional<double>>(cfg.n_paths));
    std::vector<char> exploded(cfg.n_paths, 0);
    parallel_for(cfg.n_paths, threads, [&](std::size_t b) {
        const auto bundle = simulate_coupled(m, d, x_grid, cfg, b, std::span(&probe, 1));
        for (size_t j = 0; j < k; ++j) {
            taus[j][b] = first_passage(bundle[j], level, Direction::Below);
            if (bundle[j].exploded()) exploded[b] = 1;
        }
    });
    for (char e : exploded)
        if (e) cert.any_explosion = true;

    for (size_t j = 0; j < k; ++j)
        cert.estimates.push_back(
            estimate_from_times(taus[j], level, Direction::Below, cfg.t_max));

    // Coupled monotonicity: the mean sequence must be nondecreasing within
    // Monte Carlo tolerance. Pathwise violations indicate a coupling bug.
    for (size_t j = 1; j < k; ++j) {
        const auto& lo = cert.estimates[j - 1];
        const auto& hi = cert.estimates[j];
        const double tol = 3.0 * (lo.stderr_ + hi.stderr_) + 1e-12;
        if (hi.mean < lo.mean - tol)
            throw consistency_error("coupled passage means decreased along the grid");
    }

    const auto& a = cert.estimates[k - 2];
    const auto& b = cert.estimates[k - 1];
    cert.last_increment = b.mean - a.mean;
    cert.last_increment_err = 3.0 * std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    cert.saturated = !b.infinite_flag &&
                     cert.last_increment <= std::max(cert.last_increment_err, 1e-3);
    return cert;
}

ExplosionProbe explosion_probe(const Mechanism& m, const DriftSpec& d, double x0,
                               const SimConfig& cfg, int threads) {
    ExplosionProbe probe;
    auto run_leg = [&](double cap) {
        ExplosionProbe::Leg leg;
        leg.cap = cap;
        leg.n = cfg.n_paths;
        SimConfig run = cfg;
        run.x_explode = cap;
        std::vector<char> hit(run.n_paths, 0);
        parallel_for(run.n_paths, threads, [&](std::size_t i) {
            const PathRecord rec = simulate_path(m, d, x0, run, i);
            hit[i] = rec.exploded() ? 1 : 0;
        });
        for (char h : hit) leg.hits += h;
        leg.fraction = static_cast<double>(leg.hits) / leg.n;
        leg.stderr_ = std::sqrt(leg.fraction * (1.0 - leg.fraction) / leg.n);
        leg.upper_bound_995 = clopper_pearson_upper(leg.hits, leg.n, 0.995);
        return leg;
    };
    probe.base = run_leg(cfg.x_explode);
    probe.widened = run_leg(cfg.x_explode * 10.0);
    const double denom = std::max(probe.base.fraction, 1e-12);
    probe.relative_change = std::fabs(probe.widened.fraction - probe.base.fraction) / denom;
    return probe;
}

} // namespace cbdi
