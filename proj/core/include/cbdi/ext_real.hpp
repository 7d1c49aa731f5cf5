#pragma once

#include <cmath>
#include <limits>
#include <string>

namespace cbdi {

/// Nonnegative extended real: a finite value or a distinguished +infinity.
/// Infinite classification integrals are meaningful verdicts, so they travel
/// as an explicit state instead of a floating-point overflow.
class ExtReal {
public:
    ExtReal() : v_(0.0), inf_(false) {}

    static ExtReal finite(double v) { return ExtReal(v, false); }
    static ExtReal infinity() { return ExtReal(0.0, true); }

    bool is_finite() const noexcept { return !inf_; }
    bool is_infinite() const noexcept { return inf_; }

    /// Finite value; calling on infinity is a logic error in the caller,
    /// returns +inf double to fail loudly downstream.
    double value() const noexcept {
        return inf_ ? std::numeric_limits<double>::infinity() : v_;
    }

    ExtReal operator+(const ExtReal& o) const {
        if (inf_ || o.inf_) return infinity();
        return finite(v_ + o.v_);
    }
    ExtReal& operator+=(const ExtReal& o) { return *this = *this + o; }

    ExtReal scaled(double c) const { return inf_ ? infinity() : finite(c * v_); }

    std::string str() const {
        return inf_ ? std::string("inf") : std::to_string(v_);
    }

private:
    ExtReal(double v, bool inf) : v_(v), inf_(inf) {}
    double v_;
    bool inf_;
};

} // namespace cbdi
