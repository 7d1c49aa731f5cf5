#include "cbdi/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbdi/classifier.hpp"
#include "cbdi/quadrature.hpp"

namespace cbdi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int (f(x+u) - f(x) - u f'(x) 1_{u<=1}) pi(du).
// The absolute tolerance scales with 1/x because the generator multiplies the
// integral by x.
double jump_integral(const LevyMeasure& levy, const DriftSpec& d, const TestFunction& tf,
                     double x) {
    if (levy.is_zero()) return 0.0;
    const double dfx = tf.df(x);

    double total = 0.0;
    for (const auto& atom : levy.atoms()) {
        double g = tf.delta(x, atom.size);
        if (atom.size <= 1.0) g -= atom.size * dfx;
        total += atom.mass * g;
    }

    const bool monotone_tail = tf.df_nonincreasing_tail();
    const double tol = 1e-6 / std::max(x, 1.0);
    quad::Options qopt;
    qopt.abs_tol = 0.1 * tol;
    qopt.rel_tol = 1e-8;

    for (const auto& piece : levy.pieces()) {
        double lo = piece.a;
        double hi = piece.b;

        // Trim the lower end: |f(x+u) - f(x) - u f'(x)| <= u^2/2 sup|f''| near x.
        if (lo < 1e-8) {
            double sup_d2 = 0.0;
            for (double t = 0.0; t <= 1.0; t += 0.25)
                sup_d2 = std::max(sup_d2, std::fabs(tf.d2f(x + t * 1e-8)));
            sup_d2 *= 1.5;
            double delta = 1e-8;
            auto trimmed = [&](double dl) {
                double bnd = 0.0;
                for (const auto& t : piece.terms) {
                    const double e = t.p + 3.0; // p > -3 for a valid measure
                    bnd += 0.5 * sup_d2 * std::fabs(t.C) * std::pow(dl, e) / e;
                }
                return bnd;
            };
            while (trimmed(delta) > tol && delta > 1e-260) delta *= 0.5;
            lo = std::max(lo, delta);
        }

        auto integrand = [&](double u) {
            double g = tf.delta(x, u);
            if (u <= 1.0) g -= u * dfx;
            return g * piece.eval(u);
        };

        if (hi != kInf) {
            if (hi > lo) {
                quad::Result r = quad::integrate_geometric(integrand, lo, hi, {1.0}, qopt);
                total += r.checked("generator jump integral");
            }
            continue;
        }

        // Unbounded piece: integrate to a cutoff with a certified remainder.
        const auto lf = levy.tail_form();
        const auto gf = d.growth_form();
        double B = std::max({lo * 4.0, x * 4.0, 16.0});
        if (monotone_tail && lf && gf) {
            // Parts against the tail:
            //   int_B^inf (f(x+u) - f(x)) pi(du)
            //     = (f(x+B) - f(x)) tail(B) + int_B^inf f'(x+u) tail(u) du,
            // and with I nondecreasing past the threshold,
            //   f1'(x+u) <= 2 u / I(u),  f2'(x+u) <= 1 / I(u)   for u >= x.
            const bool is_f1 = tf.tag() == TestFunction::Tag::LyapunovF1;
            const double shift = is_f1 ? 1.0 : 0.0;
            const double mult = is_f1 ? 2.0 : 1.0;
            const double from_min =
                std::max({lf->from, d.growth_from(), tf.kappa(), 2.0});
            auto rem = [&](double cut) {
                const double from = std::max(cut, from_min);
                return tf.delta(x, cut) * levy.tail(cut) +
                       quad::power_log_tail_bound(mult * lf->term.C / gf->C,
                                                  shift + lf->term.p - gf->p,
                                                  lf->term.q - gf->q, from);
            };
            B = std::max(B, from_min);
            int guard = 0;
            while (rem(B) > tol && guard++ < 120) B *= 2.0;
            if (rem(B) > tol)
                throw numerical_error("generator jump tail did not shrink", rem(B));
            quad::Result r = quad::integrate_geometric(integrand, lo, B, {1.0}, qopt);
            total += r.checked("generator jump integral");
        } else {
            // No usable forms: double the cutoff and watch the partials.
            std::vector<double> partials;
            double acc = 0.0;
            double prev_block = kInf;
            double cut_lo = lo;
            bool settled = false;
            for (int k = 0; k < 40; ++k) {
                quad::Result r =
                    quad::integrate_geometric(integrand, cut_lo, B, {1.0}, qopt);
                acc += r.value;
                partials.push_back(acc);
                const double block = std::fabs(r.value);
                if (block < tol + 1e-12 * std::fabs(acc) && block <= prev_block) {
                    settled = true;
                    break;
                }
                prev_block = block;
                cut_lo = B;
                B *= 2.0;
            }
            if (!settled)
                throw generator_divergence("jump integral for custom test function "
                                           "did not settle under cutoff doubling",
                                           partials);
            total += acc;
        }
    }
    return total;
}

} // namespace

double apply_generator(const Mechanism& m, const DriftSpec& d, const TestFunction& tf,
                       double x) {
    if (!(x > 0.0)) throw config_error("apply_generator requires x > 0");
    const double dfx = tf.df(x);
    const double d2fx = tf.d2f(x);
    double out = -d.eval(x) * dfx - m.gamma() * x * dfx +
                 0.5 * m.sigma() * m.sigma() * x * d2fx;
    out += x * jump_integral(m.levy(), d, tf, x);
    return out;
}

double f2_large_jump_term(const Mechanism& m, const DriftSpec& d, double z) {
    const auto& levy = m.levy();
    if (levy.is_zero()) return 0.0;
    auto integrand = [&](double u) { return z * levy.tail(u) / d.eval(u + z); };

    if (auto su = levy.support_upper()) {
        if (*su <= 1.0) return 0.0;
        quad::Result r =
            quad::integrate_geometric(integrand, 1.0, *su * 1.0000001, levy.tail_knots());
        return r.checked("f2 large-jump term");
    }

    // I nondecreasing beyond its threshold: tail(u)/I(u+z) <= tail(u)/I(u),
    // giving an exact power-log remainder bound.
    const auto lf = *levy.tail_form();
    const auto df = d.growth_form();
    double B = 1e8;
    if (df) {
        auto rem = [&](double cut) {
            return quad::power_log_tail_bound(z * lf.term.C / df->C,
                                              lf.term.p - df->p + 0.0, lf.term.q - df->q,
                                              cut);
        };
        int guard = 0;
        while (rem(B) > 1e-10 && guard++ < 40) B *= 4.0;
    }
    quad::Result r = quad::integrate_geometric(integrand, 1.0, B, levy.tail_knots());
    return r.checked("f2 large-jump term");
}

MarginReport lyapunov_margin(const Mechanism& m, const DriftSpec& d, LyapunovWhich which,
                             const MarginGrid& grid) {
    MarginReport rep;
    const double lo = grid.lo > 0.0 ? grid.lo : std::max(d.kappa(), 1.0);
    const double ratio = std::exp2(grid.ratio_log2);

    // The margin only certifies under the structural hypotheses; the curve is
    // still scanned for diagnostics when evaluation is possible.
    bool hypotheses = true;
    if (auto b1 = d.check_B1(); !b1.pass) {
        hypotheses = false;
        rep.reason = "structural condition fails: " + b1.reason;
    } else if (which == LyapunovWhich::F2) {
        if (auto b2 = d.check_B2(); !b2.pass) {
            hypotheses = false;
            rep.reason = "structural condition fails: " + b2.reason;
        }
    }

    TestFunction tf = TestFunction::custom([](double) { return 0.0; },
                                           [](double) { return 0.0; },
                                           [](double) { return 0.0; });
    try {
        tf = (which == LyapunovWhich::F1) ? TestFunction::lyapunov_f1(d)
                                          : TestFunction::lyapunov_f2(d);
    } catch (const config_error& e) {
        rep.certified = false;
        if (rep.reason.empty())
            rep.reason = std::string("test function unavailable: ") + e.what();
        return rep;
    }

    const double sig2 = 0.5 * m.sigma() * m.sigma();
    try {
        for (double z = lo; z <= grid.hi * (1.0 + 1e-12); z *= ratio) {
            MarginPoint pt;
            pt.z = z;
            pt.xf = apply_generator(m, d, tf, z);
            if (which == LyapunovWhich::F1) {
                const double I = d.eval(z);
                const auto dI = d.deriv(z);
                const double curv =
                    dI ? sig2 * (I - z * *dI) / (I * I) : 0.0;
                pt.eps = pt.xf / z + 1.0 - curv;
            } else {
                pt.eps = pt.xf + 1.0 - f2_large_jump_term(m, d, z);
            }
            rep.curve.push_back(pt);
        }
    } catch (const numerical_error& e) {
        rep.certified = false;
        rep.reason = std::string("generator evaluation failed: ") + e.what();
        return rep;
    }

    if (!hypotheses) {
        rep.certified = false;
        return rep;
    }

    // Suffix maxima of Xf: certified (M, c) comes from the earliest grid
    // point whose entire suffix stays below -(c + slack).
    constexpr double kSlack = 1e-3;
    const size_t n = rep.curve.size();
    std::vector<double> suffix_max(n);
    double run = -kInf;
    for (size_t i = n; i-- > 0;) {
        run = std::max(run, rep.curve[i].xf);
        suffix_max[i] = run;
    }
    for (size_t i = 0; i < n; ++i) {
        const double c = -suffix_max[i] - kSlack;
        if (c >= kSlack) {
            rep.certified = true;
            rep.M = rep.curve[i].z;
            rep.c = c;
            return rep;
        }
    }
    rep.certified = false;
    rep.reason = "no grid point certifies Xf <= -c with c >= 1e-3";
    return rep;
}

TheoremAVerdict theorem_A_verdict(const Mechanism& m, const DriftSpec& d) {
    TheoremAVerdict v;
    v.f1 = lyapunov_margin(m, d, LyapunovWhich::F1);
    v.f2 = lyapunov_margin(m, d, LyapunovWhich::F2);

    IntegralValue flow = IntegralValue::undecidable("not computed");
    try {
        flow = flow_integral(d);
    } catch (const config_error&) {
        // drift not positive beyond kappa: f2 cannot be bounded
    }
    v.f2_bounded = flow.is_finite();

    if (v.f1.certified) {
        v.kind = TheoremAKind::MeanHit; // subsumes non-explosion
        v.x0 = v.f1.M;
    }
    if (v.f2.certified && v.f2_bounded) {
        v.kind = TheoremAKind::CDI;
        v.x0 = v.f2.M;
    }
    return v;
}

} // namespace cbdi
