#include <doctest.h>

#include <cmath>

#include "cbdi/rng.hpp"

using namespace cbdi;

TEST_CASE("streams are reproducible and keyed by identity") {
    RngStream a(7, 3, StreamRole::Gaussian);
    RngStream b(7, 3, StreamRole::Gaussian);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    RngStream c(7, 3, StreamRole::JumpSize);
    RngStream d(7, 4, StreamRole::Gaussian);
    RngStream e(8, 3, StreamRole::Gaussian);
    RngStream a2(7, 3, StreamRole::Gaussian);
    bool all_same_role = true, all_same_path = true, all_same_seed = true;
    for (int i = 0; i < 16; ++i) {
        const uint64_t ref = a2.next_u64();
        all_same_role &= (c.next_u64() == ref);
        all_same_path &= (d.next_u64() == ref);
        all_same_seed &= (e.next_u64() == ref);
    }
    CHECK_FALSE(all_same_role);
    CHECK_FALSE(all_same_path);
    CHECK_FALSE(all_same_seed);
}

TEST_CASE("uniform and gaussian moments") {
    RngStream s(12345, 0, StreamRole::Gaussian);
    const int n = 100000;
    double su = 0.0, sg = 0.0, sg2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = s.next_double();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
        su += u;
        const double g = s.next_gaussian();
        sg += g;
        sg2 += g * g;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sg / n == doctest::Approx(0.0).scale(1.0).epsilon(0.02));
    CHECK(std::fabs(sg / n) < 3.0 / std::sqrt(static_cast<double>(n)) + 1e-3);
    CHECK(sg2 / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("poisson sample mean") {
    RngStream s(99, 1, StreamRole::PoissonCount);
    const int n = 100000;
    const double mean = 3.0;
    long total = 0;
    for (int i = 0; i < n; ++i) total += s.next_poisson(mean);
    const double m = static_cast<double>(total) / n;
    CHECK(std::fabs(m - mean) < 3.0 * std::sqrt(mean / n));
    CHECK(s.next_poisson(0.0) == 0);
}
