#include <doctest.h>

#include <cmath>

#include "cbdi/drift.hpp"
#include "cbdi/quadrature.hpp"
#include "cbdi/rng.hpp"

using namespace cbdi;

TEST_CASE("drift evaluation closed forms") {
    const auto log2d = DriftSpec::logistic(2.0);
    CHECK(log2d.eval(3.0) == 9.0);
    CHECK(*log2d.deriv(3.0) == 6.0);

    const auto lin = DriftSpec::linear(-1.0);
    CHECK(lin.eval(5.0) == -5.0);

    const auto pl = DriftSpec::power_log(1.0, 1.5, 0.0);
    CHECK(pl.eval(4.0) == doctest::Approx(8.0).epsilon(1e-14));

    // blend: value/derivative continuity at z0, zero at the origin
    const auto plb = DriftSpec::power_log(1.0, 1.5, 2.0); // z0 = e
    const double z0 = M_E;
    CHECK(plb.eval(0.0) == 0.0);
    CHECK(plb.eval(z0 * (1.0 - 1e-8)) ==
          doctest::Approx(plb.eval(z0)).epsilon(1e-6));
    const double below = *plb.deriv(z0 * (1.0 - 1e-9));
    const double above = *plb.deriv(z0);
    CHECK(below == doctest::Approx(above).epsilon(1e-6));
}

TEST_CASE("admissibility check") {
    CHECK(DriftSpec::logistic(1.0).check_A().pass);
    CHECK(DriftSpec::linear(-2.0).check_A().pass);

    const auto bad = DriftSpec::custom([](double) { return 1.0; },
                                       [](double) { return 0.0; }, 1.0);
    const auto out = bad.check_A();
    CHECK_FALSE(out.pass);
    REQUIRE(out.witness.has_value());
    CHECK(*out.witness == 0.0);
}

TEST_CASE("growth and integral condition") {
    CHECK(DriftSpec::power_log(1.0, 1.5, 0.0).with_kappa(1.0).check_B1().pass);
    CHECK(DriftSpec::logistic(2.0).with_kappa(1.0).check_B1().pass);

    CHECK_FALSE(DriftSpec::linear(1.0).check_B1().pass); // I(z)/z bounded
    // integral converges once the growth passes quadratic
    CHECK_FALSE(DriftSpec::power_log(1.0, 2.5, 0.0).with_kappa(1.0).check_B1().pass);
    CHECK_FALSE(DriftSpec::power_log(1.0, 2.0, 1.5).check_B1().pass);
    // quadratic-with-log boundary: beta_hat <= 1 still diverges
    CHECK(DriftSpec::power_log(1.0, 2.0, 1.0).check_B1().pass);
    CHECK(DriftSpec::power_log(1.0, 2.0, -1.0).check_B1().pass);
}

TEST_CASE("derivative ratio boundedness") {
    CHECK(DriftSpec::logistic(2.0).with_kappa(1.0).check_B2().pass);
    CHECK(DriftSpec::power_log(1.0, 2.0, 0.0).with_kappa(1.0).check_B2().pass);
    CHECK_FALSE(DriftSpec::power_log(1.0, 3.0, 0.0).with_kappa(1.0).check_B2().pass);
    CHECK_FALSE(DriftSpec::power_log(1.0, 2.0, 0.5).check_B2().pass);
}

TEST_CASE("one-sided Lipschitz certification") {
    auto b3 = DriftSpec::logistic(1.0).check_B3(1e4);
    CHECK(b3.pass);
    CHECK(b3.b == 0.0);

    b3 = DriftSpec::linear(-2.0).check_B3(1e4);
    CHECK(b3.pass);
    CHECK(b3.b == 2.0);

    const auto custom = DriftSpec::custom([](double z) { return z * z - z; },
                                          [](double z) { return 2.0 * z - 1.0; }, 1.0);
    b3 = custom.check_B3(1e4);
    CHECK(b3.pass);
    CHECK(b3.b == doctest::Approx(1.0).epsilon(1e-6));

    // certified b satisfies the inequality on a fresh random grid
    RngStream rng(31, 0, StreamRole::UniformMark);
    for (int i = 0; i < 500; ++i) {
        const double y = rng.next_uniform(100.0);
        const double z = 1e-3 + rng.next_uniform(100.0);
        CHECK(custom.eval(y + z) - custom.eval(y) >= -b3.b * z - 1e-9 * (1.0 + y + z));
    }
}

TEST_CASE("ratio monotonicity holds for drifts passing the growth check") {
    RngStream rng(77, 0, StreamRole::UniformMark);
    for (const auto& d : {DriftSpec::logistic(0.7).with_kappa(0.5),
                          DriftSpec::power_log(2.0, 1.3, 0.0).with_kappa(1.0),
                          DriftSpec::power_log(1.0, 1.0, 2.0)}) {
        REQUIRE(d.check_B1().pass);
        for (int i = 0; i < 300; ++i) {
            const double z1 = d.kappa() * (1.0 + rng.next_uniform(1e6));
            const double z2 = z1 * (1.0 + rng.next_double());
            CHECK(d.eval(z2) / z2 >= d.eval(z1) / z1 * (1.0 - 1e-9));
        }
    }
}

TEST_CASE("default kappa search lands where the ratio turns monotone") {
    // I = z^2 (log z)^-3: the ratio z (log z)^-3 dips until z = e^3
    const auto d = DriftSpec::power_log(1.0, 2.0, -3.0);
    CHECK(d.kappa() > 10.0);
    CHECK(d.kappa() < 100.0);
    CHECK(d.check_B1().pass);
}

TEST_CASE("closed-form cumulatives agree with quadrature") {
    const auto d = DriftSpec::logistic(2.0).with_kappa(1.0);
    const auto g1 = d.g1_closed(std::exp(1.0));
    REQUIRE(g1.has_value());
    CHECK(*g1 == doctest::Approx(1.0).epsilon(1e-12));

    const auto pl = DriftSpec::power_log(1.0, 1.5, 0.0).with_kappa(1.0);
    const auto f2 = pl.f2_closed(9.0);
    REQUIRE(f2.has_value());
    const auto quadd = quad::integrate([&](double u) { return 1.0 / pl.eval(u); },
                                       1.0, 9.0);
    CHECK(*f2 == doctest::Approx(quadd.value).epsilon(1e-9));
}
