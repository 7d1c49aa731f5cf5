#pragma once

#include <vector>

#include "cbdi/errors.hpp"
#include "cbdi/mechanism.hpp"
#include "cbdi/test_function.hpp"

namespace cbdi {

/// Divergent jump integral for a custom test function; carries the partial
/// sums seen while the cutoff doubled.
class generator_divergence : public numerical_error {
public:
    generator_divergence(const std::string& msg, std::vector<double> partials)
        : numerical_error(msg), partials_(std::move(partials)) {}
    const std::vector<double>& partial_sums() const { return partials_; }

private:
    std::vector<double> partials_;
};

/// Extended generator applied at x > 0:
///   Xf(x) = -I(x) f'(x) - gamma x f'(x) + (sigma^2/2) x f''(x)
///         + x int (f(x+u) - f(x) - u f'(x) 1_{u<=1}) pi(du).
/// The jump integral splits at u = 1 with a second-order bound trimming the
/// small-jump end and a certified cutoff for the upper tail.
double apply_generator(const Mechanism& m, const DriftSpec& d, const TestFunction& tf,
                       double x);

/// Large-jump part of the f2 expansion: int_1^inf z tail(u) / I(u+z) du.
/// Tends to 0 as z grows exactly when the nonexplosion integral is finite.
double f2_large_jump_term(const Mechanism& m, const DriftSpec& d, double z);

enum class LyapunovWhich { F1, F2 };

struct MarginPoint {
    double z = 0.0;
    double xf = 0.0;  // Xf(z)
    double eps = 0.0; // measured residual of the asymptotic expansion
};

/// Scan of Xf over a geometric grid with the certified (M, c) pair:
/// Xf(z) <= -c for every grid z >= M. Certification requires c >= 1e-3 after
/// slack; failure is an expected outcome when the hypotheses do not hold.
struct MarginReport {
    bool certified = false;
    double M = 0.0;
    double c = 0.0;
    std::vector<MarginPoint> curve;
    std::string reason;
};

struct MarginGrid {
    double lo = 0.0;   // 0: use max(kappa, 1)
    double hi = 1e8;
    double ratio_log2 = 0.25;
};

MarginReport lyapunov_margin(const Mechanism& m, const DriftSpec& d, LyapunovWhich which,
                             const MarginGrid& grid = {});

enum class TheoremAKind { None, NonExplosive, MeanHit, CDI };

/// Composition of the margin certificates:
///   F1 certified            -> non-explosion and integrable passage below M1,
///   F2 certified + flow<inf -> coming down from infinity with x0 = M2.
struct TheoremAVerdict {
    TheoremAKind kind = TheoremAKind::None;
    double x0 = 0.0;
    MarginReport f1;
    MarginReport f2;
    bool f2_bounded = false;
};

TheoremAVerdict theorem_A_verdict(const Mechanism& m, const DriftSpec& d);

} // namespace cbdi
