#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "deepbsde/tensor.hpp"

namespace deepbsde {

/// Counter-based pseudo random stream (Philox-4x64, 10 rounds).
///
/// The generator is keyed by (seed, stream_id), so any number of mutually
/// independent streams can be created from one seed without coordination.
/// State is a 256-bit block counter plus the 128-bit key; the counter is
/// incremented before each block is produced, matching the reference
/// implementation the golden file in tests/data was produced with.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{seed, stream_id}, counter_{0, 0, 0, 0}, buf_pos_(4) {}

    std::uint64_t seed() const { return key_[0]; }
    std::uint64_t stream_id() const { return key_[1]; }

    std::uint64_t next_u64() {
        if (buf_pos_ == 4) {
            increment_counter();
            philox_block();
            buf_pos_ = 0;
        }
        return buf_[buf_pos_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  private:
    static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    static std::uint64_t mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi) {
        unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
        hi = static_cast<std::uint64_t>(p >> 64);
        return static_cast<std::uint64_t>(p);
    }

    void increment_counter() {
        for (int i = 0; i < 4; ++i)
            if (++counter_[i] != 0) break;
    }

    void philox_block() {
        std::uint64_t c0 = counter_[0], c1 = counter_[1], c2 = counter_[2], c3 = counter_[3];
        std::uint64_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k0 += kWeyl0;
                k1 += kWeyl1;
            }
            std::uint64_t hi0, hi1;
            std::uint64_t lo0 = mulhilo(kMul0, c0, hi0);
            std::uint64_t lo1 = mulhilo(kMul1, c2, hi1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
        }
        buf_[0] = c0;
        buf_[1] = c1;
        buf_[2] = c2;
        buf_[3] = c3;
    }

    std::uint64_t key_[2];
    std::uint64_t counter_[4];
    std::uint64_t buf_[4];
    int buf_pos_;
};

inline RngStream make_rng(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(seed, stream_id);
}

/// Fills `out` with independent standard normal draws via Box-Muller.
///
/// Draws are consumed in pairs and both outputs of each pair are used; for
/// odd lengths the second output of the final pair is discarded rather than
/// cached, so the mapping from stream position to output is stateless.
inline void fill_normal(RngStream& rng, std::span<double> out) {
    const double two_pi = 2.0 * std::numbers::pi;
    std::size_t i = 0;
    while (i < out.size()) {
        // u1 in (0, 1] so the log is finite; u2 in [0, 1).
        double u1 = static_cast<double>((rng.next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = two_pi * u2;
        out[i++] = r * std::cos(theta);
        if (i < out.size()) out[i++] = r * std::sin(theta);
    }
}

/// Standard normal tensor of the given shape.
inline DenseTensor standard_normal(RngStream& rng, std::vector<std::size_t> shape) {
    require(!shape.empty(), "standard_normal: shape must be non-empty");
    DenseTensor t(std::move(shape));
    fill_normal(rng, std::span<double>(t.data(), t.size()));
    return t;
}

}  // namespace deepbsde
