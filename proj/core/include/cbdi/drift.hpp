#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "cbdi/levy.hpp" // LogPowerTerm

namespace cbdi {

struct CheckOutcome {
    bool pass = false;
    std::string reason;              // populated on failure
    std::optional<double> witness;   // violating point, when one exists

    static CheckOutcome ok() { return {true, "", std::nullopt}; }
    static CheckOutcome fail(std::string r, std::optional<double> w = std::nullopt) {
        return {false, std::move(r), w};
    }
};

/// One-sided Lipschitz certification: I(y+z) - I(y) >= -b z on the window.
struct B3Outcome {
    bool pass = false;
    double b = 0.0;
    std::string reason;
    std::optional<std::pair<double, double>> witness;
};

/// Interaction drift I with structural-condition checkers. Conditions are
/// decided on declared domains by exponent arithmetic for the parametric
/// families and by grid certification otherwise. Immutable; checks are pure.
class DriftSpec {
public:
    enum class Family { PowerLog, Logistic, Linear, Custom };

    using EvalFn = std::function<double(double)>;

    /// I(z) = c z^ahat (log z)^bhat for z >= z0, cubic blend to I(0) = 0
    /// below. z0 defaults to 1 when bhat == 0, to e otherwise.
    static DriftSpec power_log(double c, double alpha_hat, double beta_hat,
                               double z0 = 0.0);
    /// I(z) = (c/2) z^2.
    static DriftSpec logistic(double c);
    /// I(z) = a z.
    static DriftSpec linear(double a);
    static DriftSpec none() { return linear(0.0); }
    /// Caller-supplied evaluators; the derivative may be absent (kinks give an
    /// undefined-derivative signal). An asymptotic power-log form may be
    /// declared to enable exponent arithmetic.
    static DriftSpec custom(EvalFn I, EvalFn dI, double kappa,
                            std::optional<LogPowerTerm> tail_form = std::nullopt,
                            double tail_from = 1.0);

    Family family() const { return family_; }

    double eval(double z) const;
    double operator()(double z) const { return eval(z); }

    /// Derivative; nullopt signals an undefined derivative (Custom kinks).
    std::optional<double> deriv(double z) const;

    /// Threshold for the structural conditions. Defaults to the smallest
    /// grid point from which I is positive with I(z)/z nondecreasing.
    double kappa() const { return kappa_; }
    DriftSpec with_kappa(double k) const;
    bool kappa_explicit() const { return kappa_explicit_; }

    /// [A]: I(0) <= 0 and I locally Lipschitz on (0, inf).
    CheckOutcome check_A(double z_max = 1e8) const;
    /// (B1): I C^1 and positive on [kappa, inf), I(z)/z nondecreasing and
    /// unbounded, int_kappa^inf u/I(u) du = inf.
    CheckOutcome check_B1(double z_max = 1e8) const;
    /// (B2): I'(z)/z bounded on [kappa, inf).
    CheckOutcome check_B2(double z_max = 1e8) const;
    /// (B3): grid-certified smallest b with I(y+z) - I(y) >= -b z on
    /// [0, z_max]^2; analytic -inf I' for differentiable families.
    B3Outcome check_B3(double z_max = 1e6) const;

    /// Exact form I(z) = C z^p (log z)^q for z >= growth_from(), when known.
    std::optional<LogPowerTerm> growth_form() const;
    double growth_from() const;

    /// Slope when the drift is exactly linear; lets the simulator fold it
    /// into the linear rate so the reduction is bitwise exact.
    std::optional<double> linear_slope() const {
        if (family_ == Family::Linear) return lin_a_;
        return std::nullopt;
    }

    /// Closed-form cumulatives from kappa, when available:
    /// g1(h) = int_kappa^h u/I(u) du,  f2(z) = int_kappa^z du/I(u).
    std::optional<double> g1_closed(double h) const;
    std::optional<double> f2_closed(double z) const;

    std::string describe() const;

private:
    DriftSpec() = default;
    void resolve_default_kappa();

    Family family_ = Family::Linear;
    // power-log
    double c_ = 0.0, ahat_ = 0.0, bhat_ = 0.0, z0_ = 1.0;
    double blend2_ = 0.0, blend3_ = 0.0; // cubic coefficients below z0
    // logistic / linear
    double lin_a_ = 0.0;
    // custom
    EvalFn custom_I_;
    EvalFn custom_dI_;
    std::optional<LogPowerTerm> custom_form_;
    double custom_from_ = 1.0;

    double kappa_ = 1.0;
    bool kappa_explicit_ = false;
};

} // namespace cbdi
