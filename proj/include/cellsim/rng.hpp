#pragma once

// Counter-based deterministic random streams. Every stochastic draw in the
// simulator comes from a stream keyed by (master_seed, domain tag, entity id,
// step), so results do not depend on evaluation order or thread count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace cellsim {

namespace detail {

inline constexpr std::uint64_t kMix1 = 0xff51afd7ed558ccdULL;
inline constexpr std::uint64_t kMix2 = 0xc4ceb9fe1a85ec53ULL;

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= kMix1;
    x ^= x >> 33;
    x *= kMix2;
    x ^= x >> 33;
    return x;
}

inline constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// One independently seeded stream. Successive draws apply a strong 64-bit
/// mix to (key, counter); identical keys always reproduce the same sequence.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::string_view domain_tag,
              std::uint64_t entity_id, std::uint64_t step)
        : key_(derive_key(master_seed, domain_tag, entity_id, step)) {}

    std::uint64_t next_u64() {
        std::uint64_t v = detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
        return detail::mix64(v ^ key_);
    }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (fresh pair each call, no cached state,
    /// so draw counts stay position-independent).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    double exponential(double rate) {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u) / rate;
    }

    /// Poisson by inversion for small means, normal approximation above.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            double l = std::exp(-mean);
            double p = 1.0;
            std::uint64_t k = 0;
            do {
                ++k;
                p *= uniform();
            } while (p > l);
            return k - 1;
        }
        double v = std::round(normal(mean, std::sqrt(mean)));
        return v < 0.0 ? 0 : static_cast<std::uint64_t>(v);
    }

    /// Geometric on {1, 2, ...} with the given mean (>= 1).
    std::uint64_t geometric(double mean) {
        if (mean <= 1.0) return 1;
        double p = 1.0 / mean;
        double u = uniform();
        while (u <= 0.0) u = uniform();
        auto k = static_cast<std::uint64_t>(std::ceil(std::log(u) / std::log1p(-p)));
        return k < 1 ? 1 : k;
    }

    double lognormal(double log_mu, double log_sigma) {
        return std::exp(normal(log_mu, log_sigma));
    }

  private:
    static std::uint64_t derive_key(std::uint64_t seed, std::string_view tag,
                                    std::uint64_t entity, std::uint64_t step) {
        std::uint64_t k = detail::mix64(seed ^ detail::fnv1a(tag));
        k = detail::mix64(k ^ (entity * 0x9e3779b97f4a7c15ULL));
        k = detail::mix64(k ^ (step * 0xbf58476d1ce4e5b9ULL));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

inline RngStream rng_stream(std::uint64_t master_seed, std::string_view domain_tag,
                            std::uint64_t entity_id, std::uint64_t step) {
    return RngStream(master_seed, domain_tag, entity_id, step);
}

}  // namespace cellsim
