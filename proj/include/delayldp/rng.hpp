#pragma once

// Counter-based normal/uniform generator (Philox4x32-10).
//
// A stream is identified by (seed, stream_id). Draw i of a stream is a pure
// function of (seed, stream_id, i), so streams can be created per sample and
// replayed without carrying generator state between workers.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace delayldp {

namespace detail {

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept {
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

// 53 random bits -> (0, 1), never exactly 0 so log() is safe.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Identifies one reproducible stream of draws.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Sequential reader over an RngStream. Normals come from Box-Muller on one
/// Philox block (two uniforms -> two normals), so draw 2j and 2j+1 share a block.
class NormalSource {
public:
    explicit NormalSource(RngStream stream, std::uint64_t first_draw = 0) noexcept
        : stream_(stream), next_(first_draw) {}

    /// Pair of independent uniforms on (0,1) for block `block`.
    [[nodiscard]] std::array<double, 2> uniforms(std::uint64_t block) const noexcept {
        const std::array<std::uint32_t, 4> ctr{
            static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
            static_cast<std::uint32_t>(stream_.stream_id),
            static_cast<std::uint32_t>(stream_.stream_id >> 32)};
        const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(stream_.seed),
                                               static_cast<std::uint32_t>(stream_.seed >> 32)};
        const auto r = detail::philox4x32_10(ctr, key);
        return {detail::to_open_unit(r[0], r[1]), detail::to_open_unit(r[2], r[3])};
    }

    /// Standard normal number `index` of the stream.
    [[nodiscard]] double normal_at(std::uint64_t index) const noexcept {
        const auto u = uniforms(index / 2);
        const double radius = std::sqrt(-2.0 * std::log(u[0]));
        const double angle = 2.0 * std::numbers::pi * u[1];
        return (index % 2 == 0) ? radius * std::cos(angle) : radius * std::sin(angle);
    }

    double next_normal() noexcept {
        const std::uint64_t index = next_++;
        if (index % 2 == 1 && cached_index_ == index) return cached_;
        const auto u = uniforms(index / 2);
        const double radius = std::sqrt(-2.0 * std::log(u[0]));
        const double angle = 2.0 * std::numbers::pi * u[1];
        if (index % 2 == 1) return radius * std::sin(angle);
        cached_ = radius * std::sin(angle);
        cached_index_ = index + 1;
        return radius * std::cos(angle);
    }

    /// Uniform on (0,1); consumes one block per pair of calls.
    double next_uniform() noexcept {
        const auto u = uniforms(next_ / 2);
        const double v = u[next_ % 2];
        ++next_;
        return v;
    }

    [[nodiscard]] std::uint64_t position() const noexcept { return next_; }
    [[nodiscard]] const RngStream& stream() const noexcept { return stream_; }

private:
    RngStream stream_;
    std::uint64_t next_;
    double cached_ = 0.0;
    std::uint64_t cached_index_ = ~std::uint64_t{0};
};

}  // namespace delayldp
