#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace penn {

// Deterministic random stream. All randomness in the project flows through
// this type so that a fixed seed yields bitwise-identical results on every
// platform: mt19937_64 output is fully specified by the standard, and the
// uniform/normal transforms below are implemented explicitly rather than
// relying on the (implementation-defined) standard distributions.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    // Derive an independently seeded stream for a named sub-task. The parent
    // stream is not advanced.
    RngStream derive(std::string_view name) const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
        for (char c : name) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 1099511628211ull;
        }
        return RngStream(splitmix(seed_ ^ h));
    }

    RngStream derive(std::uint64_t index) const {
        return RngStream(splitmix(seed_ ^ (0x9e3779b97f4a7c15ull + index)));
    }

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in (0, 1]: never returns 0 so it is safe under log().
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    }

    // Uniform in [0, 1).
    double uniform_co() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) {
        // Rejection-free modulo bias is negligible for the n used here, but
        // Lemire-style rejection keeps the draw exact.
        const std::uint64_t bound = n;
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t t = (-bound) % bound;
            while (lo < t) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::size_t>(m >> 64);
    }

    // Standard normal via Box-Muller, caching the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform_co();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
    std::uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace penn
