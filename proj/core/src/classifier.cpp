#include "cbdi/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cbdi/errors.hpp"
#include "cbdi/quadrature.hpp"

namespace cbdi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailStart = 1e8;   // quadrature stops here, exact forms take over
constexpr double kFitMargin = 0.05;  // fitted exponents this close to critical: Undecidable

void require_positive_drift(const DriftSpec& d, double z_max = kTailStart) {
    for (double z = std::max(d.kappa(), 1e-3); z <= z_max; z *= 4.0) {
        if (!(d.eval(z) > 0.0))
            throw config_error("drift must be positive on [kappa, inf) for the "
                               "classification integrals");
    }
}

// Exact or fitted power-log form of a positive function at infinity.
struct TailExponent {
    double C = 0.0, p = 0.0, q = 0.0;
    double from = 1.0;
    bool exact = false;
};

TailExponent drift_exponent(const DriftSpec& d) {
    if (auto f = d.growth_form())
        return {f->C, f->p, f->q, std::max(d.growth_from(), d.kappa()), true};
    // Fit the slope over the last decade of the window.
    const double B = kTailStart;
    const double s = std::log(d.eval(B) / d.eval(B / 10.0)) / std::log(10.0);
    const double C = d.eval(B) / std::pow(B, s);
    return {C, s, 0.0, B / 10.0, false};
}

// Finiteness of int_U^inf C u^p log^q u du under exactness flags.
IntegralValue decide_tail(double C, double p, double q, double U, bool exact) {
    if (C == 0.0) return IntegralValue::finite(0.0);
    // Exactly critical exponent sums reach here with rounding residue from
    // the parameter arithmetic; snap them so the log power decides.
    if (std::fabs(p + 1.0) < 1e-9) p = -1.0;
    if (!exact && std::fabs(p + 1.0) < kFitMargin)
        return IntegralValue::undecidable("fitted tail exponent too close to critical");
    if (quad::diverges_at_infinity(p, q)) return IntegralValue::infinite();
    double resid = 0.0;
    const ExtReal v = quad::power_log_tail_integral(C, p, q, U, &resid);
    return IntegralValue::finite(v.value(), resid);
}

} // namespace

IntegralValue integral_I(const LevyMeasure& levy, const DriftSpec& d) {
    if (levy.is_zero()) return IntegralValue::finite(0.0);
    require_positive_drift(d);
    const double kappa = std::max(d.kappa(), 1e-12);

    auto integrand = [&](double u) { return u * levy.tail(u) / d.eval(u); };

    if (auto su = levy.support_upper()) {
        // tail vanishes beyond the support: a plain finite integral
        const double hi = *su * 1.0000001;
        if (hi <= kappa) return IntegralValue::finite(0.0);
        quad::Result r = quad::integrate_geometric(integrand, kappa, hi, levy.tail_knots());
        return IntegralValue::finite(r.checked("integral_I"), r.abs_err);
    }

    const auto lf = *levy.tail_form();
    const auto de = drift_exponent(d);
    const double C = lf.term.C / de.C;
    const double p = 1.0 + lf.term.p - de.p;
    const double q = lf.term.q - de.q;
    const double U = std::max({lf.from, de.from, kappa, 1.0});

    IntegralValue tail = decide_tail(C, p, q, U, lf.exact && de.exact);
    if (!tail.is_finite()) return tail;

    quad::Result head = quad::integrate_geometric(integrand, kappa, U, levy.tail_knots());
    return IntegralValue::finite(head.checked("integral_I head") + tail.value,
                                 head.abs_err + tail.residual);
}

IntegralValue flow_integral(const DriftSpec& d) {
    require_positive_drift(d);
    const double kappa = std::max(d.kappa(), 1e-12);
    const auto de = drift_exponent(d);
    const double U = std::max({de.from, kappa, 1.0});

    // 1/I(u) = (1/C) u^{-p} log^{-q}
    IntegralValue tail = decide_tail(1.0 / de.C, -de.p, -de.q, U, de.exact);
    if (!tail.is_finite()) return tail;

    auto integrand = [&](double u) { return 1.0 / d.eval(u); };
    quad::Result head = quad::integrate_geometric(integrand, kappa, U, {});
    return IntegralValue::finite(head.checked("flow head") + tail.value,
                                 head.abs_err + tail.residual);
}

IntegralValue integral_J(const LevyMeasure& levy, const DriftSpec& d) {
    const IntegralValue a = flow_integral(d);
    const IntegralValue b = integral_I(levy, d);
    if (a.is_infinite() || b.is_infinite()) return IntegralValue::infinite();
    if (!a.is_finite()) return a;
    if (!b.is_finite()) return b;
    return IntegralValue::finite(a.value + b.value, a.residual + b.residual);
}

double moment_G(const DriftSpec& d, double h) {
    const double kappa = d.kappa();
    if (!(h >= kappa)) throw config_error("moment_G requires h >= kappa");
    if (h == kappa) return 0.0;
    if (auto v = d.g1_closed(h)) return *v;
    auto integrand = [&](double u) { return u / d.eval(u); };
    quad::Result r = quad::integrate_geometric(integrand, std::max(kappa, 1e-12), h, {});
    return r.checked("moment_G");
}

IntegralValue moment_criterion(const LevyMeasure& levy, const DriftSpec& d) {
    const IntegralValue direct = integral_I(levy, d);
    if (levy.is_zero()) return IntegralValue::finite(0.0);
    const double kappa = d.kappa();

    if (!direct.is_finite()) {
        // The moment route shares the decision; no independent value to check.
        return direct;
    }

    double total = 0.0;
    double resid = direct.residual;

    for (const auto& atom : levy.atoms())
        if (atom.size > kappa) total += atom.mass * moment_G(d, atom.size);

    for (const auto& piece : levy.pieces()) {
        const double lo = std::max(piece.a, kappa);
        double hi = piece.b;
        if (hi <= lo && hi != kInf) continue;

        double exact_tail = 0.0;
        if (hi == kInf) {
            // Parts identity for the remainder, exact when both tail forms
            // are known:
            //   int_[B,inf) G dpi = G(B) tail(B) + int_B^inf (u/I(u)) tail(u) du.
            const auto gf = d.growth_form();
            const auto lf = levy.tail_form();
            if (gf && lf) {
                const double B =
                    std::max({kTailStart, lo * 10.0, lf->from, d.growth_from()});
                hi = B;
                double r1 = 0.0;
                const ExtReal t1 = quad::power_log_tail_integral(
                    lf->term.C / gf->C, 1.0 + lf->term.p - gf->p,
                    lf->term.q - gf->q, B, &r1);
                if (t1.is_infinite())
                    throw consistency_error("moment_criterion: exact tail diverges "
                                            "but integral_I was finite");
                exact_tail = moment_G(d, B) * levy.tail(B) + t1.value();
                resid += r1;
            } else {
                // No growth form: bound the remainder by G(h) <= C_b h and
                // push B until the bound is negligible; refuse to certify when
                // it cannot shrink.
                double B = std::max(kTailStart, lo * 10.0);
                double Cb = 0.0;
                for (double z = std::max(kappa * 2.0, 2.0); z <= B; z *= 4.0)
                    Cb = std::max(Cb, moment_G(d, z) / z);
                Cb *= 1.5;
                auto bound_at = [&](double cut) {
                    double bound = 0.0;
                    for (const auto& t : piece.terms)
                        bound += quad::power_log_tail_bound(Cb * std::fabs(t.C),
                                                            t.p + 1.0, t.q, cut);
                    return bound;
                };
                int guard = 0;
                while (bound_at(B) > 1e-8 && guard++ < 40) B *= 2.0;
                const double bound = bound_at(B);
                if (!std::isfinite(bound))
                    throw numerical_error(
                        "moment_criterion: cannot certify the tail remainder");
                hi = B;
                resid += bound;
            }
        }

        if (hi > lo) {
            auto f = [&](double h) { return moment_G(d, h) * piece.eval(h); };
            quad::Result r = quad::integrate_geometric(f, lo, hi, levy.tail_knots());
            total += r.checked("moment_criterion piece");
            resid += r.abs_err;
        }
        total += exact_tail;
    }

    // Dual-route identity: the direct integral and the moment form must agree.
    const double tol =
        std::max({1e-6 * std::fabs(direct.value), 3.0 * resid, 1e-10});
    if (std::fabs(total - direct.value) > tol)
        throw consistency_error("moment_criterion disagrees with integral_I beyond "
                                "tolerance (dual-route identity violated)");
    return IntegralValue::finite(total, resid);
}

std::vector<std::string> regime_table(double a, double b, double ah, double bh) {
    std::vector<std::string> rows;
    const bool ah_mid = ah > 1.0 && ah < 2.0;
    if (ah_mid && a + ah > 2.0) rows.push_back("a1");
    if (a > 1.0 && ah == 1.0 && bh > 0.0) rows.push_back("a2");
    if (ah == 2.0) rows.push_back("a3");
    if (ah_mid && a + ah == 2.0 && bh - b > 1.0) rows.push_back("a4");
    if (a == 1.0 && ah == 1.0 && bh - b > 1.0 && bh > 0.0) rows.push_back("a5");
    if (ah_mid && a + ah > 2.0) rows.push_back("b1");
    if (a > 1.0 && ah == 1.0 && bh > 1.0) rows.push_back("b2");
    if (ah == 2.0) rows.push_back("b3");
    if (ah_mid && a + ah == 2.0 && bh - b > 1.0) rows.push_back("b4");
    if (a == 1.0 && ah == 1.0 && bh - b > 1.0 && bh > 1.0) rows.push_back("b5");
    return rows;
}

namespace {

// Dominance shortcut: when the drift eventually dominates a quadratic, the
// ordered-drift comparison transfers the quadratic verdicts upward.
struct QuadraticDominator {
    bool ok = false;
    DriftSpec drift = DriftSpec::none();
    std::string note;
};

QuadraticDominator quadratic_dominator(const DriftSpec& d) {
    QuadraticDominator out;
    const auto form = d.growth_form();
    if (!form) return out;
    // Need I(z) >= c' z^2 for all large z: exponent must dominate z^2.
    if (!(form->p > 2.0 || (form->p == 2.0 && form->q >= 0.0))) return out;

    const double lo = std::max({d.kappa(), d.growth_from(), 2.0});
    double cmin = kInf;
    for (double z = lo; z <= kTailStart; z *= 1.0905077326652577)
        cmin = std::min(cmin, d.eval(z) / (z * z));
    if (!(cmin > 0.0) || !std::isfinite(cmin)) return out;

    out.ok = true;
    out.drift = DriftSpec::power_log(0.9 * cmin, 2.0, 0.0).with_kappa(lo);
    out.note = "dominates 0.9*" + std::to_string(cmin) + "*z^2 beyond " +
               std::to_string(lo);
    return out;
}

} // namespace

ClassificationReport classify(const Mechanism& m, const DriftSpec& d) {
    ClassificationReport rep;
    rep.kappa = d.kappa();
    rep.b1 = d.check_B1();
    rep.b2 = d.check_B2();
    rep.b3 = d.check_B3(1e6);

    bool positive = true;
    try {
        require_positive_drift(d);
    } catch (const config_error&) {
        positive = false;
    }

    if (positive) {
        rep.integral_I = integral_I(m.levy(), d);
        rep.flow = flow_integral(d);
        rep.integral_J = integral_J(m.levy(), d);
    } else {
        rep.integral_I = IntegralValue::undecidable("drift not positive beyond kappa");
        rep.flow = rep.integral_I;
        rep.integral_J = rep.integral_I;
    }

    rep.nonexplosion = (rep.b1.pass && rep.integral_I.is_finite())
                           ? Verdict::Guaranteed
                           : Verdict::Inconclusive;
    rep.cdi = (rep.b1.pass && rep.b2.pass && rep.integral_J.is_finite())
                  ? Verdict::Guaranteed
                  : Verdict::Inconclusive;

    if (rep.nonexplosion == Verdict::Inconclusive ||
        rep.cdi == Verdict::Inconclusive) {
        const auto dom = quadratic_dominator(d);
        if (dom.ok) {
            const IntegralValue qi = integral_I(m.levy(), dom.drift);
            const IntegralValue qj = integral_J(m.levy(), dom.drift);
            // The quadratic passes the structural conditions by construction.
            if (qi.is_finite() && rep.nonexplosion == Verdict::Inconclusive) {
                rep.nonexplosion = Verdict::Guaranteed;
                rep.used_drift_comparison = true;
            }
            if (qj.is_finite() && rep.cdi == Verdict::Inconclusive) {
                rep.cdi = Verdict::Guaranteed;
                rep.used_drift_comparison = true;
            }
            if (rep.used_drift_comparison) rep.comparison_note = dom.note;
        }
    }
    // Coming down from infinity entails non-explosion.
    if (rep.cdi == Verdict::Guaranteed) rep.nonexplosion = Verdict::Guaranteed;

    if (m.levy().family() == LevyMeasure::Family::ParetoLogTail) {
        const auto lf = *m.levy().tail_form();
        if (auto df = d.growth_form();
            df && (d.family() == DriftSpec::Family::PowerLog ||
                   d.family() == DriftSpec::Family::Logistic)) {
            rep.table_rows = regime_table(-lf.term.p, lf.term.q, df->p, df->q);
        }
    }
    return rep;
}

} // namespace cbdi
