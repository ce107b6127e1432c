#pragma once

// Counter-based random number generation (Philox4x32-10, Salmon et al. 2011)
// plus the samplers used by the simulator. Every logical substream is
// addressed by (seed, block, purpose), so a draw depends only on that
// address and never on processing order or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace photonlink {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, const std::array<uint32_t, 2>& key) {
    const uint64_t p0 = uint64_t{0xD2511F53u} * ctr[0];
    const uint64_t p1 = uint64_t{0xCD9E8D57u} * ctr[2];
    ctr = {static_cast<uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
           static_cast<uint32_t>(p1),
           static_cast<uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
           static_cast<uint32_t>(p0)};
}

} // namespace detail

/// One 128-bit block of Philox4x32-10.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> counter,
                                          std::array<uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        if (round) {
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        detail::philox_round(counter, key);
    }
    return counter;
}

// Substream tags; they keep the independent random consumers of one
// simulation from ever sharing a counter.
enum class StreamPurpose : uint32_t {
    signal_skip = 1,  // per-chunk geometric skips between emitting cycles
    signal_event = 2, // per-cycle draws for one emitted photon
    stage_noise = 3,  // per-chunk converter background walk
    dark_ch0 = 4,
    dark_ch1 = 5,
    loss = 6,
    jitter = 7,
    split = 8,
    noise = 9, // generic test/tooling streams
};

class RngStream {
public:
    RngStream(uint64_t seed, uint64_t block, StreamPurpose purpose)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          block_lo_(static_cast<uint32_t>(block)),
          block_hi_purpose_(static_cast<uint32_t>(purpose) |
                            (static_cast<uint32_t>(block >> 32) << 8)) {}

    uint32_t next_u32() {
        if (have_ == 0) {
            buf_ = philox4x32({static_cast<uint32_t>(draw_), static_cast<uint32_t>(draw_ >> 32),
                               block_lo_, block_hi_purpose_},
                              key_);
            ++draw_;
            have_ = 4;
        }
        return buf_[4 - have_--];
    }

    uint64_t next_u64() {
        const uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in the open interval (0, 1).
    double uniform() { return (next_u32() + 0.5) * 0x1p-32; }

    /// Uniform integer in [0, n).
    uint64_t uniform_below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Exponential with the given mean.
    double exponential(double mean) { return -mean * std::log(uniform()); }

    /// Standard normal (Box-Muller, spare value cached).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    /// Number of Bernoulli(p) failures before the next success.
    /// p must be in (0, 1]; p == 1 always returns 0.
    uint64_t geometric_skip(double p) {
        if (p >= 1.0)
            return 0;
        const double k = std::floor(std::log(uniform()) / std::log1p(-p));
        if (k >= 9.2e18)
            return std::numeric_limits<uint64_t>::max();
        return static_cast<uint64_t>(k);
    }

private:
    std::array<uint32_t, 2> key_;
    uint32_t block_lo_;
    uint32_t block_hi_purpose_;
    uint64_t draw_ = 0;
    std::array<uint32_t, 4> buf_{};
    int have_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace photonlink
