#pragma once

#include <string>
#include <vector>

#include "cbdi/drift.hpp"
#include "cbdi/mechanism.hpp"

namespace cbdi {

/// Outcome of an improper-integral evaluation. Finiteness is decided by
/// exponent arithmetic when exact tail forms exist, by fitted slopes with a
/// safety margin otherwise; a decision inside the margin is Undecidable,
/// never a silent finite answer.
struct IntegralValue {
    enum class Kind { Finite, Infinite, Undecidable };
    Kind kind = Kind::Undecidable;
    double value = 0.0;    // meaningful when Finite
    double residual = 0.0; // certified quadrature residual when Finite
    std::string note;

    static IntegralValue finite(double v, double r = 0.0) {
        return {Kind::Finite, v, r, ""};
    }
    static IntegralValue infinite() { return {Kind::Infinite, 0.0, 0.0, ""}; }
    static IntegralValue undecidable(std::string why) {
        return {Kind::Undecidable, 0.0, 0.0, std::move(why)};
    }
    bool is_finite() const { return kind == Kind::Finite; }
    bool is_infinite() const { return kind == Kind::Infinite; }
};

enum class Verdict { Guaranteed, Inconclusive };

/// Sufficient-condition verdicts plus the numeric classification integrals.
/// Verdicts are one-directional: the criteria certify, they never refute.
struct ClassificationReport {
    IntegralValue integral_I; // int_kappa^inf u tail(u)/I(u) du
    IntegralValue integral_J; // int_kappa^inf (1 + u tail(u))/I(u) du
    IntegralValue flow;       // int_kappa^inf du/I(u)
    CheckOutcome b1, b2;
    B3Outcome b3;
    Verdict nonexplosion = Verdict::Inconclusive;
    Verdict cdi = Verdict::Inconclusive;
    std::vector<std::string> table_rows; // matched regime rows, parametric pairs only
    double kappa = 1.0;
    bool used_drift_comparison = false; // dominance-by-quadratic shortcut fired
    std::string comparison_note;
};

/// int_kappa^inf u tail(u)/I(u) du. Requires I > 0 on [kappa, inf) (sampled).
IntegralValue integral_I(const LevyMeasure& levy, const DriftSpec& d);

/// int_kappa^inf du/I(u).
IntegralValue flow_integral(const DriftSpec& d);

/// integral_I + flow with infinite/undecidable propagation.
IntegralValue integral_J(const LevyMeasure& levy, const DriftSpec& d);

/// G(h) = int_kappa^h u/I(u) du, h >= kappa.
double moment_G(const DriftSpec& d, double h);

/// int G(h) pi(dh), evaluated against the measure directly (atoms plus
/// density pieces). Asserts agreement with integral_I, in finiteness and (to the combined
/// residual tolerance) in value; disagreement throws
/// consistency_error.
IntegralValue moment_criterion(const LevyMeasure& levy, const DriftSpec& d);

/// Full sufficient-condition classification, including the regime-table tags
/// for parametric pairs and the dominance-by-quadratic comparison shortcut.
ClassificationReport classify(const Mechanism& m, const DriftSpec& d);

/// The ten regime rows for tail ~ c_B u^-alpha (log u)^beta and drift
/// I ~ c_I z^alpha_hat (log z)^beta_hat. Pure predicates on the exponents.
std::vector<std::string> regime_table(double alpha, double beta, double alpha_hat,
                                      double beta_hat);

} // namespace cbdi
