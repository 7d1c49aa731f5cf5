#include "cbdi/rng.hpp"

#include <cmath>

namespace cbdi {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void philox_round(std::array<uint32_t, 4>& c, const std::array<uint32_t, 2>& k) {
    const uint64_t p0 = static_cast<uint64_t>(kPhiloxM0) * c[0];
    const uint64_t p1 = static_cast<uint64_t>(kPhiloxM1) * c[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline std::array<uint32_t, 4> philox10(std::array<uint32_t, 4> ctr,
                                        std::array<uint32_t, 2> key) {
    for (int i = 0; i < 10; ++i) {
        philox_round(ctr, key);
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

} // namespace

RngStream::RngStream(uint64_t seed, uint64_t path_index, StreamRole role) {
    key_ = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
    ctr_ = {0u, 0u, static_cast<uint32_t>(path_index),
            static_cast<uint32_t>(path_index >> 32) ^
                (static_cast<uint32_t>(role) << 24 | 0x5bu)};
}

void RngStream::fill_block() {
    block_ = philox10(ctr_, key_);
    block_pos_ = 0;
    if (++ctr_[0] == 0u) ++ctr_[1]; // 64-bit block counter
}

uint64_t RngStream::next_u64() {
    if (block_pos_ >= 3) fill_block();
    const uint64_t lo = block_[block_pos_];
    const uint64_t hi = block_[block_pos_ + 1];
    block_pos_ += 2;
    return (hi << 32) | lo;
}

double RngStream::next_double() {
    // 53 random bits, offset by half an ulp: strictly inside (0,1).
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
    if (has_gauss_cache_) {
        has_gauss_cache_ = false;
        return gauss_cache_;
    }
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    gauss_cache_ = r * std::sin(a);
    has_gauss_cache_ = true;
    return r * std::cos(a);
}

double RngStream::next_exponential() { return -std::log(next_double()); }

long RngStream::next_poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    long k = 0;
    double prod = next_double();
    while (prod > limit) {
        ++k;
        prod *= next_double();
    }
    return k;
}

} // namespace cbdi
