#pragma once

#include <array>
#include <cstdint>

namespace cbdi {

/// Logical role of a random stream within one simulated path. Streams with
/// different roles never share counters, so adding a draw to one role cannot
/// perturb another.
enum class StreamRole : uint32_t {
    Gaussian = 0,
    PoissonCount = 1,
    JumpSize = 2,
    UniformMark = 3,
};

/// Counter-based random stream (Philox4x32-10). Identity is the triple
/// (seed, path index, role); draws are a pure function of identity and
/// position, so ensembles are reproducible at any worker count.
class RngStream {
public:
    RngStream(uint64_t seed, uint64_t path_index, StreamRole role);

    uint64_t next_u64();

    /// Uniform on the open interval (0,1).
    double next_double();

    double next_gaussian(); // Box-Muller, caches the second variate
    double next_exponential();

    /// Poisson by Knuth's product method; intended for mean <= ~30.
    long next_poisson(double mean);

    /// Uniform on [0, hi).
    double next_uniform(double hi) { return hi * next_double(); }

private:
    std::array<uint32_t, 2> key_;
    std::array<uint32_t, 4> ctr_;
    std::array<uint32_t, 4> block_{};
    int block_pos_ = 4; // empty
    double gauss_cache_ = 0.0;
    bool has_gauss_cache_ = false;

    void fill_block();
};

} // namespace cbdi
