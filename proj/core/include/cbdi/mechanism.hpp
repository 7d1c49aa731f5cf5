#pragma once

#include "cbdi/levy.hpp"

namespace cbdi {

/// Branching triplet (sigma, gamma, pi). The killing mass is fixed at zero:
/// the process has no jump to infinity. Immutable; concurrent use is safe.
class Mechanism {
public:
    Mechanism(double sigma, double gamma, LevyMeasure levy);

    double sigma() const { return sigma_; }
    double gamma() const { return gamma_; }
    const LevyMeasure& levy() const { return levy_; }

    /// Levy-Khintchine function
    ///   Psi(z) = (sigma^2/2) z^2 + gamma z
    ///          + int (e^{-z h} - 1 + z h 1_{h<=1}) pi(dh),   z >= 0.
    /// Throws numerical_error with the residual if quadrature stalls.
    double psi(double z) const;

    /// Same with the certified quadrature residual written out.
    double psi(double z, double* residual) const;

private:
    double sigma_;
    double gamma_;
    LevyMeasure levy_;
};

} // namespace cbdi
