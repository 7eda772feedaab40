#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace bsei {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A draw is a pure function of (key, counter), so every (stream, step, path)
/// triple owns its own variate. Changing the ensemble size or the number of
/// time steps never perturbs the draws that both configurations share.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Counter operator()(Counter ctr) const {
        Key key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        return ctr;
    }

    /// Uniform in the open interval (0, 1) built from 52 random bits; the
    /// half-step offset keeps both endpoints out.
    static constexpr double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 20) ^ (lo >> 12);
        return (static_cast<double>(bits & ((1ULL << 52) - 1)) + 0.5) * 0x1.0p-52;
    }

    /// Standard normal variate for counter (a, b, c, stream) via Box-Muller.
    double normal(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t stream = 0) const {
        const Counter r = (*this)(Counter{a, b, c, stream});
        const double u1 = to_unit(r[0], r[1]);
        const double u2 = to_unit(r[2], r[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform variate in (0, 1) for counter (a, b, c, stream).
    double uniform(std::uint32_t a, std::uint32_t b, std::uint32_t c, std::uint32_t stream = 0) const {
        const Counter r = (*this)(Counter{a, b, c, stream});
        return to_unit(r[0], r[1]);
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return Counter{hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    Key key_;
};

}  // namespace bsei
