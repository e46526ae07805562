#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace basinvol {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// Output is a pure function of (counter, key), so any element of any stream
// can be computed independently and in any order.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter block(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Mixes several 64-bit values into one seed.
constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull));
}

// Uniform in the open interval (0, 1) from 64 random bits (53-bit mantissa).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Stream tags so that different consumers of one user seed never overlap.
enum class Stream : std::uint64_t {
    init = 1,
    shuffle = 2,
    direction = 3,
    swiss_roll = 4,
    subset = 5,
    poison = 6,
};

// Sequential generator over a Philox stream identified by (seed, stream id).
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    CounterRng(std::uint64_t seed, Stream stream) noexcept : CounterRng(seed, static_cast<std::uint64_t>(stream)) {}

    std::uint64_t next_u64() noexcept {
        if (used_ >= 2) refill();
        const std::uint64_t out = (std::uint64_t{buffer_[2 * used_]} << 32) | buffer_[2 * used_ + 1];
        ++used_;
        return out;
    }

    double uniform() noexcept { return to_open_unit(next_u64()); }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    // Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = (0 - n) % n;
        for (;;) {
            const std::uint64_t x = next_u64();
            if (x >= limit) return x % n;
        }
    }

private:
    void refill() noexcept {
        buffer_ = Philox4x32::block({static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
                                     static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                    key_);
        ++position_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    Philox4x32::Counter buffer_{};
    int used_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Standard normal value addressed directly by (seed, stream, index).
// Consecutive index pairs share one Philox block through Box-Muller.
inline double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept {
    const std::uint64_t pair = index >> 1;
    const auto out = Philox4x32::block({static_cast<std::uint32_t>(pair), static_cast<std::uint32_t>(pair >> 32),
                                        static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                                       {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const double u1 = to_open_unit((std::uint64_t{out[0]} << 32) | out[1]);
    const double u2 = to_open_unit((std::uint64_t{out[2]} << 32) | out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return (index & 1) ? r * std::sin(phi) : r * std::cos(phi);
}

}  // namespace basinvol
