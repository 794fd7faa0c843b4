#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace frgnn {

/// Counter-based generator: output n is a bijective mix of (key, n).
///
/// Streams are addressed by name rather than by draw order, so a module can
/// derive its own sub-stream (`split("init")`, `split(7)`) without perturbing
/// any other consumer of the parent seed. Distributions are implemented here
/// instead of via <random> so the sequences do not depend on the standard
/// library vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    Rng split(std::string_view tag) const { return derive(hash_tag(tag)); }
    Rng split(std::uint64_t index) const { return derive(mix(index + 0x3c6ef372fe94f82bULL)); }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    /// Standard normal via Box-Muller (one draw per call).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn from a discrete distribution given by nonnegative weights.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        return weights.size() - 1;
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) { shuffle(std::span<T>(items)); }

private:
    Rng derive(std::uint64_t salt) const {
        Rng child(seed_);
        child.key_ = mix(key_ ^ mix(salt));
        return child;
    }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t hash_tag(std::string_view tag) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char c : tag) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace frgnn
