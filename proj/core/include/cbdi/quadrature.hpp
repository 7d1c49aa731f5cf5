#pragma once

#include <functional>
#include <vector>

#include "cbdi/ext_real.hpp"

namespace cbdi::quad {

struct Options {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_segments = 4000;
};

struct Result {
    double value = 0.0;
    double abs_err = 0.0; // certified residual estimate
    bool converged = false;
    long evals = 0;

    double checked(const char* what) const; // throws numerical_error if not converged
};

using Fn = std::function<double(double)>;

/// Single Gauss7/Kronrod15 panel on [a,b]. Returns the K15 value, writes the
/// error estimate.
double gk15(const Fn& f, double a, double b, double& err);

/// Adaptive GK15 with worst-segment bisection until
/// sum(err) <= max(abs_tol, rel_tol*|value|).
Result integrate(const Fn& f, double a, double b, const Options& opt = {});

/// Adaptive integration over [a,b] with 0 < a < b where the range may span
/// many orders of magnitude: panels are pre-split geometrically, optionally at
/// the supplied interior knots, then refined adaptively as one pool.
Result integrate_geometric(const Fn& f, double a, double b,
                           const std::vector<double>& knots = {},
                           const Options& opt = {});

/// Divergence rule for integrands behaving like u^p (log u)^q at infinity.
bool diverges_at_infinity(double p, double q);

/// Exact improper integral  C * int_U^inf u^p (log u)^q du  for p < -1
/// (computed in t = log u with a certified remainder cutoff). U > 1 required
/// when q < 0. Returns infinity() when diverges_at_infinity(p, q).
/// The quadrature residual is reported through *abs_err when non-null.
ExtReal power_log_tail_integral(double C, double p, double q, double U,
                                double* abs_err = nullptr,
                                const Options& opt = {});

/// Upper bound of int_U^inf |C| u^p (log u)^q du for p < -1, cheap and always
/// finite; used to budget remainders when an integrand is only *bounded* by a
/// power-log form.
double power_log_tail_bound(double C, double p, double q, double U);

/// Cumulative integral F(z) = int_{z0}^{z} g(u) du cached on a geometric node
/// grid; lookups add a single non-adaptive GK15 over the partial segment.
/// Built eagerly, read-only afterwards, safe for concurrent evaluation.
class CumulativeIntegral {
public:
    CumulativeIntegral() = default;
    CumulativeIntegral(Fn g, double z0, double z_hi, double ratio_log2 = 0.125);

    double operator()(double z) const;
    double lower() const { return z0_; }

private:
    Fn g_;
    double z0_ = 1.0;
    double log_ratio_ = 1.0;
    std::vector<double> nodes_;
    std::vector<double> prefix_;
};

} // namespace cbdi::quad
