#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbdi/ext_real.hpp"
#include "cbdi/quadrature.hpp"
#include "cbdi/rng.hpp"

namespace cbdi {

/// Exact power-log form C u^p (log u)^q valid on an interval.
struct LogPowerTerm {
    double C = 0.0;
    double p = 0.0;
    double q = 0.0;
};

/// One absolutely-continuous component of the jump measure: density equal to
/// the sum of `terms` on (a, b). b may be +inf.
struct DensityPiece {
    double a = 0.0;
    double b = 0.0;
    std::vector<LogPowerTerm> terms;

    double eval(double h) const;
};

struct Atom {
    double size = 0.0;
    double mass = 0.0;
};

/// Optional absolutely-continuous part below the tail cutoff of the
/// power-log family: density c * h^{-1-alpha} on (0, u0). alpha < 2 keeps the
/// measure Levy; alpha < 0 makes it finite-activity.
struct SmallJumpPart {
    double c = 0.0;
    double alpha = 0.0;
};

/// Jump intensity of the branching mechanism. Immutable after construction;
/// all queries are const and safe for concurrent use.
class LevyMeasure {
public:
    enum class Family { Zero, PointMass, ParetoLogTail, TabulatedTail };

    static LevyMeasure zero();
    static LevyMeasure point_mass(double size, double rate);
    /// Tail  c * u^{-alpha} (log u)^beta  for u >= u0.  alpha in [0,2] with
    /// alpha = 0 requiring beta < 0; beta != 0 requires u0 > 1. Mass below u0
    /// defaults to none unless a small-jump part is supplied.
    static LevyMeasure pareto_log_tail(double alpha, double beta, double c, double u0,
                                       std::optional<SmallJumpPart> small = std::nullopt);
    /// Monotone grid of (u, tail) pairs, power-law interpolated between knots
    /// and extrapolated past the last knot with the final segment's exponent.
    static LevyMeasure tabulated(std::vector<std::pair<double, double>> knots);

    Family family() const { return family_; }
    bool is_zero() const;

    /// Tail mass pi([u, inf]) for u > 0.
    double tail(double u) const;

    /// int_{[a,b)} h^p pi(dh) for p in {1,2}; b may be +inf. Divergent requests
    /// return the infinite signal, decided by tail-exponent arithmetic.
    ExtReal truncated_moment(int p, double a, double b) const;

    /// Draw from pi conditioned on [eps, inf); closed-form inverse tail where
    /// available, bisection on the tail otherwise. Requires tail(eps) > 0.
    double sample_above(double eps, RngStream& rng) const;

    /// Deterministic quantile of the conditional law on [eps, inf):
    /// smallest h with tail(h) <= (1-u01) * tail(eps).
    double quantile_above(double eps, double u01) const;

    /// Density decomposition (atoms excluded); pieces may carry signed terms
    /// that sum to a nonnegative density.
    const std::vector<DensityPiece>& pieces() const { return pieces_; }
    const std::vector<Atom>& atoms() const { return atoms_; }

    /// Break points of the tail function (atoms, cutoffs, tabulated knots);
    /// quadrature panels should not straddle them.
    std::vector<double> tail_knots() const;

    /// Exact tail form beyond from(): tail(u) = C u^p (log u)^q. Present for
    /// the power-log family; for tabulated tails it is the extrapolated final
    /// segment and `exact` is false. Absent for bounded-support measures.
    struct TailForm {
        LogPowerTerm term;
        double from = 1.0;
        bool exact = true;
    };
    std::optional<TailForm> tail_form() const;

    /// Largest jump size carrying mass, when the support is bounded.
    std::optional<double> support_upper() const;

    std::string describe() const;

private:
    LevyMeasure() = default;
    void validate() const;

    Family family_ = Family::Zero;
    // point mass
    double pm_size_ = 0.0, pm_rate_ = 0.0;
    // pareto-log tail
    double alpha_ = 0.0, beta_ = 0.0, c_ = 0.0, u0_ = 1.0;
    std::optional<SmallJumpPart> small_;
    // tabulated
    std::vector<std::pair<double, double>> knots_;
    std::vector<double> seg_exp_; // per-segment power exponent, + final extrapolation

    std::vector<DensityPiece> pieces_;
    std::vector<Atom> atoms_;
};

} // namespace cbdi
