#include "cbdi/mechanism.hpp"

#include <cmath>

#include "cbdi/errors.hpp"

namespace cbdi {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// e^{-zh} - 1 + zh 1_{h<=1}, evaluated without cancellation for small zh.
inline double psi_jump_integrand(double z, double h) {
    const double e = std::expm1(-z * h); // e^{-zh} - 1, accurate near 0
    return (h <= 1.0) ? e + z * h : e;
}

// Exact upper-tail mass of a density piece from B on, when the piece is
// unbounded; pieces are exact power-log forms so this is certified.
double piece_mass_beyond(const DensityPiece& piece, double B) {
    double m = 0.0;
    for (const auto& t : piece.terms) {
        const ExtReal part = quad::power_log_tail_integral(t.C, t.p, t.q, B);
        m += part.value(); // valid measure: each term integrable at infinity
    }
    return m;
}

// int (e^{-zh} - 1 + zh 1_{h<=1}) pi(dh) with a certified residual.
double jump_psi_integral(const LevyMeasure& levy, double z, double& residual) {
    residual = 0.0;
    if (levy.is_zero() || z == 0.0) return 0.0;

    double total = 0.0;
    for (const auto& atom : levy.atoms())
        total += atom.mass * psi_jump_integrand(z, atom.size);

    const double tol = 1e-12;
    for (const auto& piece : levy.pieces()) {
        const double a = piece.a;
        double b = piece.b;
        double lo = std::max(a, 1e-300);

        // Trim the lower end where the integrand is under z^2 h^2 / 2 times
        // the density; the trimmed mass is bounded in closed form.
        if (a == 0.0) {
            double delta = 1e-8;
            auto trimmed = [&](double d) {
                double bound = 0.0;
                for (const auto& t : piece.terms) {
                    // int_0^d (z^2 h^2 / 2) |C| h^p dh, p > -3 for a Levy measure
                    const double e = t.p + 3.0;
                    bound += 0.5 * z * z * std::fabs(t.C) * std::pow(d, e) / e;
                }
                return bound;
            };
            while (trimmed(delta) > tol && delta > 1e-260) delta *= 0.5;
            residual += trimmed(delta);
            lo = delta;
        }

        double exact_tail = 0.0;
        if (b == kInf) {
            // Beyond B the integrand is e^{-zh} - 1 = -1 + O(e^{-zB}).
            double B = std::max({piece.a * 2.0, 1.0, 40.0 / z});
            const double mass_beyond = piece_mass_beyond(piece, B);
            exact_tail = -mass_beyond;
            residual += std::exp(-z * B) * mass_beyond;
            b = B;
        }

        if (b > lo) {
            auto f = [&](double h) { return psi_jump_integrand(z, h) * piece.eval(h); };
            quad::Result r = quad::integrate_geometric(f, lo, b, {1.0});
            if (!r.converged)
                throw numerical_error("psi jump integral quadrature stalled on piece",
                                      r.abs_err);
            total += r.value;
            residual += r.abs_err;
        }
        total += exact_tail;
    }
    return total;
}

} // namespace

Mechanism::Mechanism(double sigma, double gamma, LevyMeasure levy)
    : sigma_(sigma), gamma_(gamma), levy_(std::move(levy)) {
    if (!(sigma >= 0.0)) throw config_error("mechanism requires sigma >= 0");
    if (!std::isfinite(gamma)) throw config_error("mechanism requires finite gamma");

    // Psi is convex on [0, inf); spot-check on a geometric grid so a broken
    // jump-integral surfaces at construction, not deep inside the classifier.
    double zs[3] = {0.0, 0.0, 0.0};
    double ps[3] = {0.0, 0.0, 0.0};
    int have = 0;
    for (double z = 1e-3; z <= 1e2; z *= 10.0) {
        zs[0] = zs[1]; zs[1] = zs[2]; zs[2] = z;
        ps[0] = ps[1]; ps[1] = ps[2]; ps[2] = psi(z);
        if (++have >= 3) {
            const double w = (zs[1] - zs[0]) / (zs[2] - zs[0]);
            const double chord = ps[0] + w * (ps[2] - ps[0]);
            const double slack = 1e-7 * (std::fabs(ps[0]) + std::fabs(ps[2]) + 1.0);
            if (ps[1] > chord + slack)
                throw consistency_error("Psi failed the convexity spot-check");
        }
    }
}

double Mechanism::psi(double z) const {
    double resid;
    return psi(z, &resid);
}

double Mechanism::psi(double z, double* residual) const {
    if (!(z >= 0.0)) throw config_error("psi requires z >= 0");
    double resid = 0.0;
    const double jump = jump_psi_integral(levy_, z, resid);
    if (residual) *residual = resid;
    return 0.5 * sigma_ * sigma_ * z * z + gamma_ * z + jump;
}

} // namespace cbdi
