#include "cbdi/levy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cbdi/errors.hpp"

namespace cbdi {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log_pow(double h, double q) {
    if (q == 0.0) return 1.0;
    return std::pow(std::log(h), q);
}
} // namespace

double DensityPiece::eval(double h) const {
    double d = 0.0;
    for (const auto& t : terms) d += t.C * std::pow(h, t.p) * log_pow(h, t.q);
    return d;
}

LevyMeasure LevyMeasure::zero() {
    LevyMeasure m;
    m.family_ = Family::Zero;
    return m;
}

LevyMeasure LevyMeasure::point_mass(double size, double rate) {
    if (!(size > 0.0) || !(rate > 0.0))
        throw config_error("point_mass requires size > 0 and rate > 0");
    if (size < 1.0)
        throw config_error("point_mass atom below 1 gives tail(1) = 0; measures with "
                           "jumps must carry mass at or above 1");
    LevyMeasure m;
    m.family_ = Family::PointMass;
    m.pm_size_ = size;
    m.pm_rate_ = rate;
    m.atoms_.push_back({size, rate});
    m.validate();
    return m;
}

LevyMeasure LevyMeasure::pareto_log_tail(double alpha, double beta, double c, double u0,
                                         std::optional<SmallJumpPart> small) {
    if (!(c > 0.0)) throw config_error("pareto_log_tail requires c > 0");
    if (!(alpha >= 0.0 && alpha <= 2.0))
        throw config_error("pareto_log_tail requires alpha in [0,2]");
    if (alpha == 0.0 && !(beta < 0.0))
        throw config_error("pareto_log_tail with alpha = 0 requires beta < 0 so the "
                           "tail still vanishes at infinity");
    if (!(u0 >= 1.0)) throw config_error("pareto_log_tail requires u0 >= 1");
    if (beta != 0.0 && !(u0 > 1.0))
        throw config_error("pareto_log_tail with beta != 0 requires u0 > 1");
    // Monotone tail on [u0, inf): d/du [u^-a log^b u] <= 0 iff a*log u >= b.
    if (beta > 0.0 && u0 < std::exp(beta / alpha))
        throw config_error("pareto_log_tail not non-increasing from u0; raise u0 to at "
                           "least exp(beta/alpha)");
    if (small) {
        if (!(small->alpha < 2.0))
            throw config_error("small-jump part needs alpha < 2 for a valid measure");
        if (!(small->c > 0.0)) throw config_error("small-jump part needs c > 0");
    }

    LevyMeasure m;
    m.family_ = Family::ParetoLogTail;
    m.alpha_ = alpha;
    m.beta_ = beta;
    m.c_ = c;
    m.u0_ = u0;
    m.small_ = small;

    // Tail density: -d/du [c u^-a (log u)^b]
    //             = c a u^{-a-1} (log u)^b  -  c b u^{-a-1} (log u)^{b-1}.
    DensityPiece tail_piece;
    tail_piece.a = u0;
    tail_piece.b = kInf;
    if (alpha != 0.0) tail_piece.terms.push_back({c * alpha, -alpha - 1.0, beta});
    if (beta != 0.0) tail_piece.terms.push_back({-c * beta, -alpha - 1.0, beta - 1.0});
    m.pieces_.push_back(std::move(tail_piece));

    if (small) {
        DensityPiece sp;
        sp.a = 0.0;
        sp.b = u0;
        sp.terms.push_back({small->c, -1.0 - small->alpha, 0.0});
        m.pieces_.push_back(std::move(sp));
    }
    m.validate();
    return m;
}

LevyMeasure LevyMeasure::tabulated(std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2) throw config_error("tabulated tail needs at least two knots");
    std::sort(knots.begin(), knots.end());
    for (size_t i = 0; i < knots.size(); ++i) {
        if (!(knots[i].first > 0.0) || !(knots[i].second > 0.0))
            throw config_error("tabulated knots must have positive u and tail values");
        if (i > 0 && !(knots[i].second <= knots[i - 1].second))
            throw config_error("tabulated tail must be non-increasing");
        if (i > 0 && knots[i].first == knots[i - 1].first)
            throw config_error("duplicate tabulated knot");
    }

    LevyMeasure m;
    m.family_ = Family::TabulatedTail;
    m.knots_ = std::move(knots);

    // Power-law interpolation per segment; final exponent extrapolates the tail.
    for (size_t i = 0; i + 1 < m.knots_.size(); ++i) {
        const auto& [u1, t1] = m.knots_[i];
        const auto& [u2, t2] = m.knots_[i + 1];
        const double p = std::log(t2 / t1) / std::log(u2 / u1);
        m.seg_exp_.push_back(p);
    }
    const double p_last = m.seg_exp_.back();
    if (!(p_last < 0.0))
        throw config_error("tabulated tail must decrease on its final segment so the "
                           "extrapolated tail vanishes at infinity");

    for (size_t i = 0; i + 1 < m.knots_.size(); ++i) {
        const auto& [u1, t1] = m.knots_[i];
        const double p = m.seg_exp_[i];
        if (p == 0.0) continue; // flat segment: no mass
        DensityPiece piece;
        piece.a = u1;
        piece.b = m.knots_[i + 1].first;
        // tail = t1 (u/u1)^p  ->  density = -t1 p u1^{-p} u^{p-1}
        piece.terms.push_back({-t1 * p * std::pow(u1, -p), p - 1.0, 0.0});
        m.pieces_.push_back(std::move(piece));
    }
    const auto& [uL, tL] = m.knots_.back();
    DensityPiece last;
    last.a = uL;
    last.b = kInf;
    last.terms.push_back({-tL * p_last * std::pow(uL, -p_last), p_last - 1.0, 0.0});
    m.pieces_.push_back(std::move(last));

    m.validate();
    return m;
}

void LevyMeasure::validate() const {
    if (is_zero()) return;
    if (!(tail(1.0) > 0.0))
        throw config_error("jump measure must satisfy tail(1) > 0");
    // int (1 ^ h^2) pi(dh) < inf: the part above 1 has finite mass tail(1);
    // below 1 check the second truncated moment.
    const ExtReal m2 = truncated_moment(2, 0.0, 1.0);
    if (m2.is_infinite() || !std::isfinite(m2.value()))
        throw config_error("jump measure fails int (1 ^ h^2) pi(dh) < inf");
    // Spot-check monotonicity of the tail on a geometric grid.
    double prev = tail(1e-3);
    for (double u = 2e-3; u < 1e9; u *= 2.0) {
        const double t = tail(u);
        if (t > prev * (1.0 + 1e-12) + 1e-300)
            throw consistency_error("tail(u) increased along the grid");
        prev = t;
    }
}

bool LevyMeasure::is_zero() const { return family_ == Family::Zero; }

double LevyMeasure::tail(double u) const {
    if (!(u > 0.0)) throw config_error("tail requires u > 0");
    switch (family_) {
        case Family::Zero:
            return 0.0;
        case Family::PointMass:
            return (u <= pm_size_) ? pm_rate_ : 0.0;
        case Family::ParetoLogTail: {
            double t = 0.0;
            const double ue = std::max(u, u0_);
            t = c_ * std::pow(ue, -alpha_) * log_pow(ue, beta_);
            if (small_ && u < u0_) {
                // add int_u^{u0} c h^{-1-a} dh
                const double a = small_->alpha;
                if (a == 0.0)
                    t += small_->c * std::log(u0_ / u);
                else
                    t += small_->c / a * (std::pow(u, -a) - std::pow(u0_, -a));
            }
            return t;
        }
        case Family::TabulatedTail: {
            if (u <= knots_.front().first) return knots_.front().second;
            size_t i = 0;
            while (i + 1 < knots_.size() && knots_[i + 1].first < u) ++i;
            if (i + 1 == knots_.size() || u > knots_.back().first) {
                const auto& [uL, tL] = knots_.back();
                return tL * std::pow(u / uL, seg_exp_.back());
            }
            const auto& [u1, t1] = knots_[i];
            return t1 * std::pow(u / u1, seg_exp_[i]);
        }
    }
    return 0.0;
}

std::vector<double> LevyMeasure::tail_knots() const {
    switch (family_) {
        case Family::Zero:
            return {};
        case Family::PointMass:
            return {pm_size_};
        case Family::ParetoLogTail:
            return {u0_};
        case Family::TabulatedTail: {
            std::vector<double> k;
            for (const auto& [u, t] : knots_) k.push_back(u);
            return k;
        }
    }
    return {};
}

std::optional<LevyMeasure::TailForm> LevyMeasure::tail_form() const {
    switch (family_) {
        case Family::Zero:
        case Family::PointMass:
            return std::nullopt;
        case Family::ParetoLogTail:
            return TailForm{{c_, -alpha_, beta_}, u0_, true};
        case Family::TabulatedTail: {
            const auto& [uL, tL] = knots_.back();
            const double p = seg_exp_.back();
            return TailForm{{tL * std::pow(uL, -p), p, 0.0}, uL, false};
        }
    }
    return std::nullopt;
}

std::optional<double> LevyMeasure::support_upper() const {
    if (family_ == Family::Zero) return 0.0;
    if (family_ == Family::PointMass) return pm_size_;
    return std::nullopt;
}

ExtReal LevyMeasure::truncated_moment(int p, double a, double b) const {
    if (p != 1 && p != 2) throw config_error("truncated_moment supports p in {1,2}");
    if (!(a >= 0.0) || !(b > a)) throw config_error("truncated_moment needs 0 <= a < b");
    if (is_zero()) return ExtReal::finite(0.0);

    // Divergence at the lower end: only the small-jump density can carry
    // infinite mass toward 0, when p <= alpha_small.
    if (a == 0.0 && family_ == Family::ParetoLogTail && small_ && p <= small_->alpha)
        return ExtReal::infinity();
    // Divergence at the upper end, from the tail exponent: h^{p-1} tail(h)
    // must be integrable at infinity.
    if (b == kInf) {
        if (auto form = tail_form()) {
            if (quad::diverges_at_infinity(p - 1 + form->term.p, form->term.q))
                return ExtReal::infinity();
        }
        // bounded support: handled as a finite upper limit below
    }

    // Integration by parts against the tail:
    //   int_[a,b) h^p pi(dh) = a^p tail(a) - b^p tail(b) + p int_a^b h^{p-1} tail(h) dh,
    // with the b-boundary vanishing when b = inf.
    const double lo = std::max(a, 1e-12);
    double hi = b;
    double exact_tail_part = 0.0;
    bool drop_hi_boundary = false;
    if (b == kInf) {
        if (auto su = support_upper()) {
            hi = *su * 1.000001;
        } else {
            const auto form = *tail_form();
            hi = std::max({1e8, form.from * 10.0, lo * 10.0});
            const ExtReal rem = quad::power_log_tail_integral(
                form.term.C * p, form.term.p + p - 1.0, form.term.q, hi);
            if (rem.is_infinite()) return ExtReal::infinity();
            exact_tail_part = rem.value();
            drop_hi_boundary = true; // -hi^p tail(hi) cancels into the exact remainder
        }
    }

    auto integrand = [&](double h) { return std::pow(h, p - 1) * tail(h); };
    quad::Result r = quad::integrate_geometric(integrand, lo, hi, tail_knots());
    double value = std::pow(lo, p) * tail(lo) + p * r.value + exact_tail_part;
    if (!drop_hi_boundary) value -= std::pow(hi, p) * tail(hi);

    // Mass between a and lo exists only for the small-jump density; add its
    // closed form.
    if (a < lo && family_ == Family::ParetoLogTail && small_) {
        const double pa = p - small_->alpha;
        double add;
        if (pa == 0.0)
            add = small_->c * std::log(lo / a); // a > 0 here, else caught above
        else if (a == 0.0)
            add = small_->c / pa * std::pow(lo, pa);
        else
            add = small_->c / pa * (std::pow(lo, pa) - std::pow(a, pa));
        value += add;
    }
    return ExtReal::finite(std::max(value, 0.0));
}

double LevyMeasure::quantile_above(double eps, double u01) const {
    const double te = tail(eps);
    if (!(te > 0.0)) throw config_error("sample_above: tail(eps) = 0, empty measure");
    if (family_ == Family::PointMass) return pm_size_;

    const double target = (1.0 - u01) * te;

    if (family_ == Family::ParetoLogTail && beta_ == 0.0 && !small_ && alpha_ > 0.0) {
        // Closed-form inverse of c u^{-alpha} from max(eps, u0).
        const double base = std::max(eps, u0_);
        const double tb = c_ * std::pow(base, -alpha_);
        if (target >= tb) return base;
        return std::pow(c_ / target, 1.0 / alpha_);
    }

    // Bisection on the (continuous) tail.
    double lo = eps, hi = std::max(eps, 1.0);
    while (tail(hi) > target && hi < 1e306) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (tail(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return hi;
}

double LevyMeasure::sample_above(double eps, RngStream& rng) const {
    return quantile_above(eps, rng.next_double());
}

std::string LevyMeasure::describe() const {
    std::ostringstream os;
    switch (family_) {
        case Family::Zero:
            os << "zero";
            break;
        case Family::PointMass:
            os << "point_mass(size=" << pm_size_ << ", rate=" << pm_rate_ << ")";
            break;
        case Family::ParetoLogTail:
            os << "pareto_log_tail(alpha=" << alpha_ << ", beta=" << beta_
               << ", c=" << c_ << ", u0=" << u0_ << ")";
            if (small_) os << "+small(c=" << small_->c << ", alpha=" << small_->alpha << ")";
            break;
        case Family::TabulatedTail:
            os << "tabulated(" << knots_.size() << " knots)";
            break;
    }
    return os.str();
}

} // namespace cbdi
