#include "cbdi/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "cbdi/errors.hpp"
#include "cbdi/quadrature.hpp"

namespace cbdi {

namespace {

constexpr double kGridLo = 1e-3;
constexpr double kGridRatio = 1.0905077326652577; // 2^(1/8)

std::vector<double> geometric_grid(double lo, double hi) {
    std::vector<double> g;
    for (double z = lo; z <= hi * (1.0 + 1e-12); z *= kGridRatio) g.push_back(z);
    return g;
}

double log_pow(double z, double q) {
    if (q == 0.0) return 1.0;
    return std::pow(std::log(z), q);
}

} // namespace

DriftSpec DriftSpec::power_log(double c, double alpha_hat, double beta_hat, double z0) {
    if (!(c > 0.0)) throw config_error("power_log drift requires c > 0");
    if (z0 == 0.0) z0 = (beta_hat == 0.0) ? 1.0 : M_E;
    if (beta_hat != 0.0 && !(z0 > 1.0))
        throw config_error("power_log drift with beta_hat != 0 requires z0 > 1");
    if (!(z0 >= 1.0)) throw config_error("power_log drift requires z0 >= 1");

    DriftSpec d;
    d.family_ = Family::PowerLog;
    d.c_ = c;
    d.ahat_ = alpha_hat;
    d.bhat_ = beta_hat;
    d.z0_ = z0;

    // Cubic blend p(z) = b2 z^2 + b3 z^3 on [0, z0): p(0) = p'(0) = 0 and
    // value/derivative continuity at z0.
    const double I0 = c * std::pow(z0, alpha_hat) * log_pow(z0, beta_hat);
    double dI0 = c * std::pow(z0, alpha_hat - 1.0);
    if (beta_hat == 0.0)
        dI0 *= alpha_hat;
    else
        dI0 *= log_pow(z0, beta_hat - 1.0) * (alpha_hat * std::log(z0) + beta_hat);
    d.blend2_ = (3.0 * I0 - z0 * dI0) / (z0 * z0);
    d.blend3_ = (z0 * dI0 - 2.0 * I0) / (z0 * z0 * z0);

    d.resolve_default_kappa();
    return d;
}

DriftSpec DriftSpec::logistic(double c) {
    if (!(c > 0.0)) throw config_error("logistic drift requires c > 0");
    DriftSpec d;
    d.family_ = Family::Logistic;
    d.c_ = c;
    d.resolve_default_kappa();
    return d;
}

DriftSpec DriftSpec::linear(double a) {
    DriftSpec d;
    d.family_ = Family::Linear;
    d.lin_a_ = a;
    d.resolve_default_kappa();
    return d;
}

DriftSpec DriftSpec::custom(EvalFn I, EvalFn dI, double kappa,
                            std::optional<LogPowerTerm> tail_form, double tail_from) {
    if (!I) throw config_error("custom drift requires an evaluator");
    DriftSpec d;
    d.family_ = Family::Custom;
    d.custom_I_ = std::move(I);
    d.custom_dI_ = std::move(dI);
    d.custom_form_ = tail_form;
    d.custom_from_ = tail_from;
    d.kappa_ = kappa;
    d.kappa_explicit_ = true;
    return d;
}

DriftSpec DriftSpec::with_kappa(double k) const {
    if (!(k >= 0.0)) throw config_error("kappa must be nonnegative");
    DriftSpec d = *this;
    d.kappa_ = k;
    d.kappa_explicit_ = true;
    return d;
}

double DriftSpec::eval(double z) const {
    switch (family_) {
        case Family::PowerLog:
            if (z >= z0_) return c_ * std::pow(z, ahat_) * log_pow(z, bhat_);
            return z * z * (blend2_ + blend3_ * z);
        case Family::Logistic:
            return 0.5 * c_ * z * z;
        case Family::Linear:
            return lin_a_ * z;
        case Family::Custom:
            return custom_I_(z);
    }
    return 0.0;
}

std::optional<double> DriftSpec::deriv(double z) const {
    switch (family_) {
        case Family::PowerLog: {
            if (z >= z0_) {
                double d = c_ * std::pow(z, ahat_ - 1.0);
                if (bhat_ == 0.0) return d * ahat_;
                return d * log_pow(z, bhat_ - 1.0) * (ahat_ * std::log(z) + bhat_);
            }
            return 2.0 * blend2_ * z + 3.0 * blend3_ * z * z;
        }
        case Family::Logistic:
            return c_ * z;
        case Family::Linear:
            return lin_a_;
        case Family::Custom: {
            if (!custom_dI_) return std::nullopt;
            const double d = custom_dI_(z);
            if (!std::isfinite(d)) return std::nullopt;
            return d;
        }
    }
    return std::nullopt;
}

std::optional<LogPowerTerm> DriftSpec::growth_form() const {
    switch (family_) {
        case Family::PowerLog:
            return LogPowerTerm{c_, ahat_, bhat_};
        case Family::Logistic:
            return LogPowerTerm{0.5 * c_, 2.0, 0.0};
        case Family::Linear:
            if (lin_a_ > 0.0) return LogPowerTerm{lin_a_, 1.0, 0.0};
            return std::nullopt;
        case Family::Custom:
            return custom_form_;
    }
    return std::nullopt;
}

double DriftSpec::growth_from() const {
    switch (family_) {
        case Family::PowerLog:
            return z0_;
        case Family::Logistic:
        case Family::Linear:
            return kGridLo;
        case Family::Custom:
            return custom_from_;
    }
    return 1.0;
}

void DriftSpec::resolve_default_kappa() {
    // Smallest grid point from which I stays positive and I(z)/z is
    // nondecreasing along the rest of the grid.
    const auto grid = geometric_grid(kGridLo, 1e8);
    std::vector<double> ratio(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) ratio[i] = eval(grid[i]) / grid[i];

    size_t start = grid.size(); // sentinel: none found
    bool ok_tail = true;
    for (size_t i = grid.size(); i-- > 0;) {
        const bool pos = eval(grid[i]) > 0.0;
        const bool mono =
            (i + 1 >= grid.size()) || ratio[i + 1] >= ratio[i] * (1.0 - 1e-12);
        ok_tail = ok_tail && pos && mono;
        if (ok_tail)
            start = i;
        else
            break;
    }
    kappa_ = (start < grid.size()) ? grid[start] : 1.0;
    kappa_explicit_ = false;
}

CheckOutcome DriftSpec::check_A(double z_max) const {
    const double at0 = eval(0.0);
    if (!(at0 <= 0.0)) return CheckOutcome::fail("I(0) > 0", 0.0);

    if (family_ != Family::Custom) return CheckOutcome::ok(); // smooth by construction

    // Difference quotients on dyadic blocks; a quotient that keeps growing
    // under refinement marks a non-Lipschitz point.
    for (double lo = std::min(1.0 / 1024.0, z_max / 2.0); lo < z_max; lo *= 2.0) {
        const double hi = std::min(2.0 * lo, z_max);
        const double width = hi - lo;
        for (int i = 0; i < 8; ++i) {
            const double z = lo + width * (i + 0.5) / 8.0;
            const double d1 = width / 64.0, d2 = width / 4096.0;
            const double q1 = std::fabs(eval(z + d1) - eval(z)) / d1;
            const double q2 = std::fabs(eval(z + d2) - eval(z)) / d2;
            if (!std::isfinite(q1) || !std::isfinite(q2))
                return CheckOutcome::fail("I not finite", z);
            if (q2 > 10.0 * q1 + 1e3)
                return CheckOutcome::fail("difference quotients blow up", z);
        }
    }
    return CheckOutcome::ok();
}

CheckOutcome DriftSpec::check_B1(double z_max) const {
    const double lo = std::max(kappa_, kGridLo);
    const auto grid = geometric_grid(lo, z_max);

    // Clause 1: C^1 and positive on [kappa, inf).
    if (kappa_ > 0.0 && !(eval(kappa_) > 0.0))
        return CheckOutcome::fail("I not positive at kappa", kappa_);
    for (double z : grid) {
        if (!(eval(z) > 0.0)) return CheckOutcome::fail("I not positive", z);
        if (!deriv(z)) return CheckOutcome::fail("I not C^1 (derivative undefined)", z);
    }

    // Clause 2: I(z)/z nondecreasing on the grid.
    double prev = eval(grid.front()) / grid.front();
    for (size_t i = 1; i < grid.size(); ++i) {
        const double r = eval(grid[i]) / grid[i];
        if (r < prev * (1.0 - 1e-9))
            return CheckOutcome::fail("I(z)/z not nondecreasing", grid[i]);
        prev = std::max(prev, r);
    }

    // Clause 3: I(z)/z -> inf.
    if (auto form = growth_form()) {
        const bool unbounded =
            form->p > 1.0 || (form->p == 1.0 && form->q > 0.0);
        if (!unbounded) return CheckOutcome::fail("I(z)/z does not tend to infinity");
    } else {
        const double r_lo = eval(grid.front()) / grid.front();
        const double r_hi = eval(grid.back()) / grid.back();
        const double r_mid = eval(grid[grid.size() / 2]) / grid[grid.size() / 2];
        if (!(r_hi > 50.0 * std::max(r_lo, 1e-300)) || !(r_hi > 2.0 * r_mid))
            return CheckOutcome::fail("cannot certify I(z)/z -> inf on the grid");
    }

    // Clause 4: int_kappa^inf u/I(u) du = inf.
    if (auto form = growth_form()) {
        // integrand ~ (1/C) u^{1-p} (log u)^{-q}
        if (!quad::diverges_at_infinity(1.0 - form->p, -form->q))
            return CheckOutcome::fail("int u/I(u) du converges");
    } else {
        // Local slope of I over the last decade decides the tail.
        const double B = grid.back();
        const double s = std::log(eval(B) / eval(B / 10.0)) / std::log(10.0);
        if (s > 2.05) return CheckOutcome::fail("int u/I(u) du converges (fitted slope)");
        if (s > 1.95)
            return CheckOutcome::fail("cannot certify divergence of int u/I(u) du");
    }
    return CheckOutcome::ok();
}

CheckOutcome DriftSpec::check_B2(double z_max) const {
    const double lo = std::max(kappa_, kGridLo);
    if (auto form = growth_form()) {
        // I'(z)/z ~ z^{p-2} (log z)^q: bounded iff p < 2, or p = 2 with q <= 0.
        const bool bounded = form->p < 2.0 || (form->p == 2.0 && form->q <= 0.0);
        if (!bounded) {
            return CheckOutcome::fail("I'(z)/z unbounded (tail exponent)", z_max);
        }
    }
    double worst = 0.0;
    double first_decade = 0.0, last_decade = 0.0;
    const auto grid = geometric_grid(lo, z_max);
    for (double z : grid) {
        const auto d = deriv(z);
        if (!d) return CheckOutcome::fail("derivative undefined", z);
        const double v = std::fabs(*d) / z;
        worst = std::max(worst, v);
        if (z <= lo * 10.0) first_decade = std::max(first_decade, v);
        if (z >= z_max / 10.0) last_decade = std::max(last_decade, v);
    }
    if (!std::isfinite(worst)) return CheckOutcome::fail("I'(z)/z not finite");
    if (!growth_form() && last_decade > 4.0 * std::max(first_decade, 1e-300))
        return CheckOutcome::fail("I'(z)/z grows along the grid", z_max);
    return CheckOutcome::ok();
}

B3Outcome DriftSpec::check_B3(double z_max) const {
    B3Outcome out;

    // Analytic route for families with a derivative bounded below.
    if (family_ == Family::Logistic) return {true, 0.0, "", std::nullopt};
    if (family_ == Family::Linear) return {true, std::max(0.0, -lin_a_), "", std::nullopt};

    double b = 0.0;
    bool have_deriv = true;
    {
        // Seed from the derivative when it exists: b >= -inf I'.
        std::vector<double> zs = geometric_grid(kGridLo / 8.0, z_max);
        zs.push_back(0.0);
        for (double z : zs) {
            const auto d = deriv(z);
            if (!d) {
                have_deriv = false;
                break;
            }
            b = std::max(b, -*d);
        }
    }

    // Grid certification of I(y+z) - I(y) >= -b z on [0, z_max]^2.
    std::vector<double> ys = geometric_grid(kGridLo, z_max);
    ys.insert(ys.begin(), 0.0);
    const std::vector<double> zs = geometric_grid(kGridLo, z_max);
    double worst = std::numeric_limits<double>::infinity();
    std::pair<double, double> worst_at{0.0, 0.0};
    for (double y : ys) {
        const double Iy = eval(y);
        for (double z : zs) {
            if (y + z > z_max * 2.0) break;
            const double slope = (eval(y + z) - Iy) / z;
            if (!std::isfinite(slope)) {
                out.pass = false;
                out.reason = "increment quotient not finite";
                out.witness = {y, z};
                return out;
            }
            if (slope < worst) {
                worst = slope;
                worst_at = {y, z};
            }
        }
    }
    if (worst < -b) b = -worst;
    if (!have_deriv && !std::isfinite(b)) {
        out.pass = false;
        out.reason = "no finite one-sided Lipschitz constant on the window";
        out.witness = worst_at;
        return out;
    }
    out.pass = true;
    out.b = std::max(0.0, b);
    return out;
}

std::optional<double> DriftSpec::g1_closed(double h) const {
    const double k = kappa_;
    if (h < k) return std::nullopt;
    switch (family_) {
        case Family::Logistic:
            if (k <= 0.0) return std::nullopt;
            return (2.0 / c_) * std::log(h / k);
        case Family::Linear:
            if (!(lin_a_ > 0.0)) return std::nullopt;
            return (h - k) / lin_a_;
        case Family::PowerLog: {
            if (bhat_ != 0.0 || k < z0_) return std::nullopt;
            if (ahat_ == 2.0) return std::log(h / k) / c_;
            const double e = 2.0 - ahat_;
            return (std::pow(h, e) - std::pow(k, e)) / (c_ * e);
        }
        case Family::Custom:
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> DriftSpec::f2_closed(double z) const {
    const double k = kappa_;
    if (z < k) return std::nullopt;
    switch (family_) {
        case Family::Logistic:
            if (k <= 0.0) return std::nullopt;
            return (2.0 / c_) * (1.0 / k - 1.0 / z);
        case Family::Linear:
            if (!(lin_a_ > 0.0) || k <= 0.0) return std::nullopt;
            return std::log(z / k) / lin_a_;
        case Family::PowerLog: {
            if (bhat_ != 0.0 || k < z0_) return std::nullopt;
            if (ahat_ == 1.0) return std::log(z / k) / c_;
            const double e = 1.0 - ahat_;
            return (std::pow(z, e) - std::pow(k, e)) / (c_ * e);
        }
        case Family::Custom:
            return std::nullopt;
    }
    return std::nullopt;
}

std::string DriftSpec::describe() const {
    std::ostringstream os;
    switch (family_) {
        case Family::PowerLog:
            os << "power_log(c=" << c_ << ", alpha_hat=" << ahat_
               << ", beta_hat=" << bhat_ << ", z0=" << z0_ << ")";
            break;
        case Family::Logistic:
            os << "logistic(c=" << c_ << ")";
            break;
        case Family::Linear:
            os << "linear(a=" << lin_a_ << ")";
            break;
        case Family::Custom:
            os << "custom";
            break;
    }
    os << ", kappa=" << kappa_;
    return os.str();
}

} // namespace cbdi
