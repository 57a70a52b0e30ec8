#pragma once

// Counter-based random streams (Philox4x32-10). A stream is addressed by
// (master seed, stream id); distinct ids give statistically independent
// streams with no shared state, so ensembles can be generated in parallel
// and partially re-run with identical results.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace sheetsew {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key)
{
    constexpr std::uint64_t M0 = 0xD2511F53ull, M1 = 0xCD9E8D57ull;
    const std::uint64_t p0 = M0 * ctr[0];
    const std::uint64_t p1 = M1 * ctr[2];
    const std::uint32_t h0 = static_cast<std::uint32_t>(p0 >> 32),
                        l0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t h1 = static_cast<std::uint32_t>(p1 >> 32),
                        l1 = static_cast<std::uint32_t>(p1);
    ctr = {h1 ^ ctr[1] ^ key[0], l1, h0 ^ ctr[3] ^ key[1], l0};
    key[0] += 0x9E3779B9u;
    key[1] += 0xBB67AE85u;
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key)
{
    for (int r = 0; r < 10; ++r) philox_round(ctr, key);
    return ctr;
}

}  // namespace detail

/// Combines up to three sub-identifiers into one stream id.
inline std::uint64_t derive_stream(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0)
{
    std::uint64_t h = detail::splitmix64(a);
    h = detail::splitmix64(h ^ detail::splitmix64(b + 0x517CC1B727220A95ull));
    h = detail::splitmix64(h ^ detail::splitmix64(c + 0x2545F4914F6CDD1Dull));
    return h;
}

class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_id_(stream_id)
    {
    }

    std::uint32_t next_u32()
    {
        if (have_ == 0) {
            buf_ = detail::philox4x32(
                {static_cast<std::uint32_t>(stream_id_),
                 static_cast<std::uint32_t>(stream_id_ >> 32),
                 static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32)},
                key_);
            ++counter_;
            have_ = 4;
        }
        return buf_[4 - have_--];
    }

    std::uint64_t next_u64()
    {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform in (0,1), never exactly 0 or 1.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    /// Standard normal via Box-Muller; pairs are consumed in order.
    double normal()
    {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = uniform(), u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    template <class It>
    void fill_normals(It first, It last)
    {
        for (; first != last; ++first) *first = normal();
    }

private:
    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_id_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int have_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Fixed purpose tags so independent uses of the same master seed never collide.
namespace stream_purpose {
inline constexpr std::uint64_t kFieldSample = 1;
inline constexpr std::uint64_t kPairSampling = 2;
inline constexpr std::uint64_t kDirections = 3;
inline constexpr std::uint64_t kPartitions = 4;
inline constexpr std::uint64_t kNonlinearity = 5;
}  // namespace stream_purpose

}  // namespace sheetsew
