#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace ids {

/// Seed derivation for independent substreams. Every stochastic task asks for
/// its own seed by (base seed, tag, a, b), so results do not depend on the
/// order in which tasks are scheduled.
///
/// derive_seed = splitmix64 chain over (base, fnv1a64(tag), a, b).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::uint64_t a = 0, std::uint64_t b = 0);

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded through splitmix64. Portable: all sampling helpers
/// below are defined here instead of relying on <random> distributions,
/// whose outputs differ between standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();

    /// Uniform integer in [0, bound) by Lemire's multiply-and-reject method.
    std::uint64_t below(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

} // namespace ids
