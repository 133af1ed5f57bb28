#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is addressed by a key derived from the
// run seed and a path of integer tags (layer, head, matrix tag, ...).  A key
// names an independent Philox4x32-10 stream, so any layer or SDE step can be
// regenerated without replaying the ones before it, and parallel workers never
// share state.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace tokdyn {

namespace detail {

inline constexpr std::uint64_t splitmix_finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

}  // namespace detail

class Stream;

// Well-known first-level tags so independent subsystems never collide.
enum class StreamTag : std::uint64_t {
    Init = 0x11,
    Layer = 0x21,
    SdeMode = 0x31,
    SdeNoise = 0x32,
    SdeDrift = 0x33,
    Estimator = 0x41,
    Trial = 0x51,
    Path = 0x61,
};

class RngKey {
  public:
    explicit constexpr RngKey(std::uint64_t seed) : value_(detail::splitmix_finalize(seed ^ 0x5851f42d4c957f2dull)) {}

    [[nodiscard]] constexpr RngKey derive(std::uint64_t tag) const {
        RngKey child = *this;
        child.value_ = detail::splitmix_finalize(value_ + 0x9e3779b97f4a7c15ull * (tag + 1));
        return child;
    }
    [[nodiscard]] constexpr RngKey derive(StreamTag tag) const {
        return derive(static_cast<std::uint64_t>(tag));
    }
    template <typename First, typename... Rest>
    [[nodiscard]] constexpr RngKey derive(First first, Rest... rest) const
        requires(sizeof...(Rest) > 0)
    {
        return derive(first).derive(rest...);
    }

    [[nodiscard]] constexpr std::uint64_t value() const { return value_; }
    [[nodiscard]] Stream stream() const;

    friend constexpr bool operator==(RngKey, RngKey) = default;

  private:
    std::uint64_t value_;
};

// Sequential view over one keyed Philox stream.
class Stream {
  public:
    explicit Stream(RngKey key)
        : key_{static_cast<std::uint32_t>(key.value()), static_cast<std::uint32_t>(key.value() >> 32)} {}

    std::uint64_t next_u64() {
        if (have_word_) {
            have_word_ = false;
            return spare_word_;
        }
        const auto block = next_block();
        spare_word_ = (std::uint64_t{block[3]} << 32) | block[2];
        have_word_ = true;
        return (std::uint64_t{block[1]} << 32) | block[0];
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a logarithm argument.
    double uniform_open_low() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double normal();
    void fill_normal(std::span<double> out);

    [[nodiscard]] std::uint64_t blocks_consumed() const { return counter_; }

  private:
    std::array<std::uint32_t, 4> next_block() {
        const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter_),
                                               static_cast<std::uint32_t>(counter_ >> 32), 0x6a09e667u, 0xf3bcc908u};
        ++counter_;
        return detail::philox4x32_10(ctr, key_);
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t counter_ = 0;
    std::uint64_t spare_word_ = 0;
    bool have_word_ = false;
    double spare_normal_ = 0.0;
    bool have_normal_ = false;
};

inline Stream RngKey::stream() const { return Stream(*this); }

}  // namespace tokdyn
