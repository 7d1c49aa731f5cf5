#include "cbdi/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cbdi/classifier.hpp"
#include "cbdi/errors.hpp"
#include "cbdi/parallel.hpp"
#include "cbdi/rng.hpp"

namespace cbdi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxHalvings = 48;
constexpr long kMaxJumpRecords = 100000;
constexpr double kJumpMeanCap = 10.0; // Poisson mean per substep

struct JumpContext {
    double tail_eps = 0.0; // rate multiplier per unit state
    double m1_comp = 0.0;  // compensation of jumps in [eps, 1]
    double var_mult = 0.0; // sigma^2 + optional small-jump variance
};

JumpContext make_context(const Mechanism& m, const SimConfig& cfg) {
    JumpContext ctx;
    const auto& levy = m.levy();
    if (!levy.is_zero()) {
        ctx.tail_eps = levy.tail(cfg.eps_jump);
        if (cfg.eps_jump <= 1.0) {
            const ExtReal m1 =
                levy.truncated_moment(1, cfg.eps_jump, std::nextafter(1.0, 2.0));
            ctx.m1_comp = m1.value();
        }
        if (cfg.gaussian_small_jumps && cfg.eps_jump > 0.0) {
            const ExtReal m2 = levy.truncated_moment(2, 0.0, cfg.eps_jump);
            ctx.var_mult = m2.value();
        }
    }
    ctx.var_mult += m.sigma() * m.sigma();
    return ctx;
}

// Per-path bookkeeping shared by the single and coupled steppers.
struct PathState {
    double x = 0.0;
    PathStatus status = PathStatus::Alive;
    double status_time = 0.0;
    bool zero_retry_done = false; // one extra halving before absorbing at 0
    PathRecord rec;
    std::vector<TrackedPassage>* tracked = nullptr;

    bool alive() const { return status == PathStatus::Alive; }
};

void init_record(PathState& ps, double x0, const SimConfig& cfg,
                 std::span<const PassageProbe> probes) {
    ps.x = x0;
    ps.rec.times.reserve(std::min<long>(cfg.max_record_points + 2, 1 << 20));
    ps.rec.tracked.reserve(probes.size());
    for (const auto& p : probes) ps.rec.tracked.push_back({p.level, p.dir, false, 0.0});
    // level already met at start
    for (auto& t : ps.rec.tracked) {
        if ((t.dir == Direction::Below && x0 <= t.level) ||
            (t.dir == Direction::Above && x0 >= t.level)) {
            t.hit = true;
            t.time = 0.0;
        }
    }
}

void record_point(PathState& ps, double t) {
    ps.rec.times.push_back(t);
    switch (ps.status) {
        case PathStatus::Alive:
            ps.rec.values.push_back(ps.x);
            break;
        case PathStatus::Extinct:
            ps.rec.values.push_back(0.0);
            break;
        case PathStatus::Exploded:
            ps.rec.values.push_back(kInf);
            break;
    }
}

// Continuous-part crossing of tracked levels, linear inside the substep.
void track_continuous(PathState& ps, double t0, double dt, double x_old, double x_new) {
    for (auto& tr : ps.rec.tracked) {
        if (tr.hit) continue;
        if (tr.dir == Direction::Below && x_old > tr.level && x_new <= tr.level) {
            tr.hit = true;
            tr.time = t0 + dt * (x_old - tr.level) / (x_old - x_new);
        } else if (tr.dir == Direction::Above && x_old < tr.level && x_new >= tr.level) {
            tr.hit = true;
            tr.time = t0 + dt * (tr.level - x_old) / (x_new - x_old);
        }
    }
}

// Jumps cross instantaneously.
void track_jump(PathState& ps, double t, double x_old, double x_new) {
    for (auto& tr : ps.rec.tracked) {
        if (tr.hit) continue;
        if (tr.dir == Direction::Above && x_old < tr.level && x_new >= tr.level) {
            tr.hit = true;
            tr.time = t;
        }
    }
}

void absorb_extinct(PathState& ps, double t) {
    ps.status = PathStatus::Extinct;
    ps.status_time = t;
    ps.x = 0.0;
    for (auto& tr : ps.rec.tracked) {
        if (!tr.hit && tr.dir == Direction::Below) {
            tr.hit = true; // state reaches 0, below any level
            tr.time = t;
        }
    }
}

void absorb_exploded(PathState& ps, double t) {
    ps.status = PathStatus::Exploded;
    ps.status_time = t;
    ps.x = kInf;
    for (auto& tr : ps.rec.tracked) {
        if (!tr.hit && tr.dir == Direction::Above) {
            tr.hit = true;
            tr.time = t;
        }
    }
}

// Linear drifts fold into the linear rate exactly: one effective slope and a
// zeroed interaction term, so the equivalence with the shifted rate holds
// bitwise under shared streams.
struct EffectiveDrift {
    double gamma_eff = 0.0;
    const DriftSpec* nonlinear = nullptr; // null when the drift was linear

    double eval(double x) const { return nonlinear ? nonlinear->eval(x) : 0.0; }
    double deriv_or_fd(double x) const {
        if (!nonlinear) return 0.0;
        if (auto dv = nonlinear->deriv(x)) return *dv;
        const double h = std::max(1e-6 * x, 1e-9);
        return (nonlinear->eval(x + h) - nonlinear->eval(std::max(x - h, 0.0))) /
               (2.0 * h);
    }
};

EffectiveDrift make_effective(const Mechanism& m, const DriftSpec& d) {
    EffectiveDrift e;
    if (auto a = d.linear_slope()) {
        e.gamma_eff = m.gamma() + *a;
    } else {
        e.gamma_eff = m.gamma();
        e.nonlinear = &d;
    }
    return e;
}

double allowed_substep(const EffectiveDrift& d, const JumpContext& ctx, double x,
                       double want, const SimConfig& cfg) {
    double dt = want;
    const double floor = want / std::pow(2.0, kMaxHalvings);
    const double jump_rate = x * ctx.tail_eps;
    const double det_rate = std::fabs(d.gamma_eff * x + d.eval(x) + x * ctx.m1_comp);
    const double lam = std::fabs(d.gamma_eff + ctx.m1_comp + d.deriv_or_fd(x));
    auto bad = [&](double s) {
        if (jump_rate * s > kJumpMeanCap) return true;
        if (lam * s > cfg.stiffness_cap) return true;
        if (det_rate * s > 0.25 * std::max(x, 1e-9)) return true;
        return false;
    };
    while (bad(dt) && dt > floor) dt *= 0.5;
    if (jump_rate * dt > kJumpMeanCap)
        throw numerical_error("jump rate overflow after substep refinement; raise "
                              "eps_jump or lower dt",
                              jump_rate * dt);
    return dt;
}

struct BundleStreams {
    RngStream gauss;
    RngStream pois;
    RngStream jump;
    RngStream marks;

    BundleStreams(uint64_t seed, uint64_t index)
        : gauss(seed, index, StreamRole::Gaussian),
          pois(seed, index, StreamRole::PoissonCount),
          jump(seed, index, StreamRole::JumpSize),
          marks(seed, index, StreamRole::UniformMark) {}
};

// Advance a set of paths sharing one noise realization by one base step.
// With a single path this reduces to the plain scheme (cells collapse to one
// Gaussian of the exact variance).
void advance_bundle(const Mechanism& m, std::span<const EffectiveDrift> drifts,
                    std::vector<PathState>& ps, double& t, double t_stop,
                    const JumpContext& ctx, const SimConfig& cfg, BundleStreams& st,
                    bool coupled_cells) {
    const size_t n = ps.size();
    const auto& levy = m.levy();

    // Substep work buffers, reused across iterations.
    std::vector<double> x_cont(n, 0.0);
    std::vector<double> gauss_incr(n, 0.0);
    std::vector<size_t> order(n, 0);
    std::vector<long> cells(n, 0);

    while (t < t_stop) {
        bool all_done = true;
        for (const auto& p : ps)
            if (p.alive()) all_done = false;
        if (all_done) {
            t = t_stop;
            return;
        }

        double x_top = 0.0;
        for (const auto& p : ps)
            if (p.alive()) x_top = std::max(x_top, p.x);

        // Substep small enough for the jump cap and for every path's drift.
        double dt_s = t_stop - t;
        {
            const double want = dt_s;
            for (size_t j = 0; j < n; ++j)
                if (ps[j].alive()) {
                    const EffectiveDrift& dj = drifts.size() == 1 ? drifts[0] : drifts[j];
                    dt_s = std::min(dt_s, allowed_substep(dj, ctx, ps[j].x, want, cfg));
                }
            // jump cap against the dominating rate
            const double jr = x_top * ctx.tail_eps;
            const double floor = want / std::pow(2.0, kMaxHalvings);
            while (jr * dt_s > kJumpMeanCap && dt_s > floor) dt_s *= 0.5;
            if (jr * dt_s > kJumpMeanCap)
                throw numerical_error("jump rate overflow after substep refinement; "
                                      "raise eps_jump or lower dt",
                                      jr * dt_s);
        }

    retry_zero:
        // Continuous part: deterministic drift plus shared Gaussian noise.
        std::fill(gauss_incr.begin(), gauss_incr.end(), 0.0);
        if (ctx.var_mult > 0.0) {
            if (coupled_cells) {
                // Cell sums drawn as ordered block increments: identical joint
                // law to summing ceil(x/delta) cells, O(n) draws.
                std::iota(order.begin(), order.end(), size_t{0});
                for (size_t j = 0; j < n; ++j)
                    cells[j] = ps[j].alive()
                                   ? static_cast<long>(
                                         std::ceil(ps[j].x / cfg.coupling_cells))
                                   : 0;
                std::stable_sort(order.begin(), order.end(),
                                 [&](size_t a, size_t b) { return cells[a] < cells[b]; });
                double acc = 0.0;
                long covered = 0;
                for (size_t idx : order) {
                    const long extra = cells[idx] - covered;
                    if (extra > 0) {
                        const double var =
                            static_cast<double>(extra) * cfg.coupling_cells *
                            ctx.var_mult * dt_s;
                        acc += st.gauss.next_gaussian() * std::sqrt(var);
                        covered = cells[idx];
                    }
                    gauss_incr[idx] = acc;
                }
            } else {
                for (size_t j = 0; j < n; ++j)
                    if (ps[j].alive())
                        gauss_incr[j] = st.gauss.next_gaussian() *
                                        std::sqrt(ps[j].x * ctx.var_mult * dt_s);
            }
        }

        bool need_zero_retry = false;
        for (size_t j = 0; j < n; ++j) {
            if (!ps[j].alive()) {
                x_cont[j] = ps[j].x;
                continue;
            }
            const EffectiveDrift& dj = drifts.size() == 1 ? drifts[0] : drifts[j];
            const double det =
                -(dj.gamma_eff * ps[j].x + dj.eval(ps[j].x) + ps[j].x * ctx.m1_comp) *
                dt_s;
            x_cont[j] = ps[j].x + det + gauss_incr[j];
            if (x_cont[j] <= 0.0 && !ps[j].zero_retry_done) need_zero_retry = true;
        }
        if (need_zero_retry) {
            for (auto& p : ps) p.zero_retry_done = true;
            dt_s *= 0.5;
            goto retry_zero;
        }

        // Settle the continuous part: crossings, absorption at 0.
        for (size_t j = 0; j < n; ++j) {
            if (!ps[j].alive()) continue;
            if (x_cont[j] <= 0.0) {
                const double frac = ps[j].x / (ps[j].x - x_cont[j]);
                track_continuous(ps[j], t, dt_s * frac, ps[j].x, 0.0);
                absorb_extinct(ps[j], t + dt_s * frac);
            } else {
                track_continuous(ps[j], t, dt_s, ps[j].x, x_cont[j]);
                ps[j].x = x_cont[j];
                ps[j].zero_retry_done = false;
            }
        }

        // Shared jump marks at the dominating rate, thinned per path.
        if (ctx.tail_eps > 0.0 && x_top > 0.0) {
            const long njumps = st.pois.next_poisson(x_top * ctx.tail_eps * dt_s);
            const double t_jump = t + dt_s;
            for (long i = 0; i < njumps; ++i) {
                const double u = st.marks.next_uniform(x_top);
                const double h = levy.sample_above(cfg.eps_jump, st.jump);
                for (size_t j = 0; j < n; ++j) {
                    if (!ps[j].alive() || u > ps[j].x) continue;
                    const double x_old = ps[j].x;
                    ps[j].x += h;
                    track_jump(ps[j], t_jump, x_old, ps[j].x);
                    if (static_cast<long>(ps[j].rec.jumps.size()) < kMaxJumpRecords)
                        ps[j].rec.jumps.emplace_back(t_jump, h);
                    else
                        ps[j].rec.dropped_jumps++;
                    if (ps[j].x >= cfg.x_explode) absorb_exploded(ps[j], t_jump);
                }
            }
        }

        for (size_t j = 0; j < n; ++j)
            if (ps[j].alive() && ps[j].x >= cfg.x_explode)
                absorb_exploded(ps[j], t + dt_s);

        t += dt_s;
    }
}

std::vector<PathRecord> run_bundle(const Mechanism& m, std::span<const DriftSpec> drifts,
                                   std::span<const double> initials, const SimConfig& cfg,
                                   uint64_t index, std::span<const PassageProbe> probes,
                                   bool coupled_cells) {
    cfg.validate();
    const size_t n = initials.size();
    std::vector<PathState> ps(n);
    for (size_t j = 0; j < n; ++j) {
        if (initials[j] >= cfg.x_explode)
            throw config_error("initial value at or above the explosion cap");
        init_record(ps[j], initials[j], cfg, probes);
        if (initials[j] == 0.0) absorb_extinct(ps[j], 0.0);
    }

    std::vector<EffectiveDrift> eff;
    eff.reserve(drifts.size());
    for (const auto& d : drifts) eff.push_back(make_effective(m, d));

    BundleStreams st(cfg.seed, index);
    const JumpContext ctx = make_context(m, cfg);

    const long n_base = std::max<long>(1, std::llround(std::ceil(cfg.t_max / cfg.dt)));
    const long stride = std::max<long>(1, (n_base + cfg.max_record_points - 1) /
                                              std::max<long>(cfg.max_record_points, 1));

    for (auto& p : ps) record_point(p, 0.0);
    double t = 0.0;
    for (long step = 1; step <= n_base; ++step) {
        const double t_stop = std::min(step * cfg.dt, cfg.t_max);
        advance_bundle(m, eff, ps, t, t_stop, ctx, cfg, st, coupled_cells);
        if (step % stride == 0 || step == n_base)
            for (auto& p : ps) record_point(p, t);
    }

    std::vector<PathRecord> out;
    out.reserve(n);
    for (auto& p : ps) {
        p.rec.status = p.status;
        p.rec.status_time = p.status_time;
        out.push_back(std::move(p.rec));
    }
    return out;
}

} // namespace

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw config_error("sim.dt must be positive");
    if (!(eps_jump > 0.0 && eps_jump <= 1.0))
        throw config_error("sim.eps_jump must lie in (0, 1]");
    if (!(x_explode > 0.0)) throw config_error("sim.x_explode must be positive");
    if (!(t_max > 0.0)) throw config_error("sim.t_max must be positive");
    if (n_paths < 1) throw config_error("sim.n_paths must be at least 1");
    if (!(coupling_cells > 0.0)) throw config_error("sim.coupling_cells must be positive");
    if (max_record_points < 2) throw config_error("sim.max_record_points must be >= 2");
    if (!(stiffness_cap > 0.0)) throw config_error("sim.stiffness_cap must be positive");
}

std::string to_string(PathStatus s) {
    switch (s) {
        case PathStatus::Alive: return "alive";
        case PathStatus::Extinct: return "extinct";
        case PathStatus::Exploded: return "exploded";
    }
    return "?";
}

PathRecord simulate_path(const Mechanism& m, const DriftSpec& d, double x0,
                         const SimConfig& cfg, uint64_t path_index,
                         std::span<const PassageProbe> probes) {
    if (auto a = d.check_A(); !a.pass)
        throw config_error("drift fails the structural admissibility check: " + a.reason);
    const DriftSpec drifts[1] = {d};
    const double init[1] = {x0};
    auto v = run_bundle(m, drifts, init, cfg, path_index, probes, false);
    return std::move(v.front());
}

std::vector<PathRecord> simulate_coupled(const Mechanism& m, const DriftSpec& d,
                                         std::span<const double> initials,
                                         const SimConfig& cfg, uint64_t bundle_index,
                                         std::span<const PassageProbe> probes) {
    if (initials.empty()) throw config_error("simulate_coupled needs initial values");
    for (size_t i = 1; i < initials.size(); ++i)
        if (!(initials[i] > initials[i - 1]))
            throw config_error("coupled initial values must be strictly increasing");
    if (auto a = d.check_A(); !a.pass)
        throw config_error("drift fails the structural admissibility check: " + a.reason);
    const DriftSpec drifts[1] = {d};
    return run_bundle(m, drifts, initials, cfg, bundle_index, probes, true);
}

std::vector<PathRecord> simulate_coupled_drifts(const Mechanism& m,
                                                std::span<const DriftSpec> drifts,
                                                double x0, const SimConfig& cfg,
                                                uint64_t bundle_index,
                                                std::span<const PassageProbe> probes) {
    if (drifts.size() < 2)
        throw config_error("simulate_coupled_drifts needs at least two drifts");
    for (const auto& d : drifts)
        if (auto a = d.check_A(); !a.pass)
            throw config_error("drift fails the structural admissibility check: " +
                               a.reason);
    std::vector<double> initials(drifts.size(), x0);
    // identical starts: relax the strict-increase rule by stepping directly
    return run_bundle(m, drifts, initials, cfg, bundle_index, probes, true);
}

EnvelopeReport simulate_from_infinity(const Mechanism& m, const DriftSpec& d,
                                      const SimConfig& cfg,
                                      std::span<const double> x_grid, double t_probe,
                                      double increment_tol, int threads) {
    if (x_grid.size() < 2)
        throw config_error("simulate_from_infinity needs at least two grid levels");

    EnvelopeReport rep;
    rep.x_grid.assign(x_grid.begin(), x_grid.end());
    rep.t_probe = t_probe;
    rep.increment_tol = increment_tol;

    try {
        const auto cls = classify(m, d);
        rep.cdi_certified = cls.cdi == Verdict::Guaranteed;
    } catch (const std::exception&) {
        rep.cdi_certified = false;
    }

    const long n_ens = std::max<long>(cfg.n_paths, 1);
    std::vector<std::vector<PathRecord>> bundles(n_ens);
    parallel_for(n_ens, threads, [&](std::size_t b) {
        bundles[b] = simulate_coupled(m, d, x_grid, cfg, b);
    });

    rep.sample_paths = bundles.front();
    rep.times = rep.sample_paths.front().times;
    const size_t n_t = rep.times.size();
    const size_t n_pairs = x_grid.size() - 1;
    rep.mean_increment.assign(n_pairs, std::vector<double>(n_t, 0.0));
    rep.rho_sup.assign(n_pairs, 0.0);

    std::vector<double> top_mean(n_t, 0.0);
    for (const auto& bundle : bundles) {
        for (const auto& p : bundle)
            if (p.exploded()) rep.any_explosion = true;
        for (size_t i = 0; i < n_t; ++i)
            top_mean[i] += bundle.back().values[i] / n_ens;
        for (size_t k = 0; k < n_pairs; ++k) {
            double sup = 0.0;
            for (size_t i = 0; i < n_t; ++i) {
                const double lo = bundle[k].values[i];
                const double hi = bundle[k + 1].values[i];
                const double inc = hi - lo;
                rep.mean_increment[k][i] += inc / n_ens;
                if (rep.times[i] >= t_probe) {
                    const double dlo = std::isinf(lo) ? 0.0 : std::exp(-lo);
                    const double dhi = std::isinf(hi) ? 0.0 : std::exp(-hi);
                    sup = std::max(sup, std::fabs(dhi - dlo));
                }
            }
            rep.rho_sup[k] += sup / n_ens;
        }
    }

    // Stabilized: at every probe time the grid increments shrink along the
    // grid and the geometric remainder past the top level stays under the
    // tolerance, both relative to the state scale.
    rep.stabilized = n_pairs >= 2;
    for (size_t i = 0; i < n_t && rep.stabilized; ++i) {
        if (rep.times[i] < t_probe) continue;
        const double scale = 1.0 + std::fabs(top_mean[i]);
        const double inc_last = std::fabs(rep.mean_increment[n_pairs - 1][i]);
        const double inc_prev = std::fabs(rep.mean_increment[n_pairs - 2][i]);
        if (inc_last <= 1e-4 * scale) continue; // at the noise floor
        if (inc_last > 0.8 * inc_prev) {
            rep.stabilized = false;
            break;
        }
        const double r = inc_last / inc_prev;
        const double remaining = inc_last * r / (1.0 - r);
        if (remaining > increment_tol * scale) rep.stabilized = false;
    }
    return rep;
}

} // namespace cbdi
