#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace arnqs {

/// Seeded random stream: xoshiro256** with its state expanded from the seed
/// by splitmix64. The integer sequence is identical on every platform;
/// uniform doubles take the top 53 bits. Gaussian draws use the Marsaglia
/// polar method on top of the uniform stream.
///
/// A stream has a single owner. Workers derive their own streams with
/// replica_seed().
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed = 0);

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1).
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Standard normal.
    double gaussian() noexcept;
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept { return next_u64(); }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Seed of replica `index` under `base`: base XOR index. Independent of
/// execution order and of how many other cells a grid has.
constexpr std::uint64_t replica_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    return base ^ index;
}

/// n i.i.d. draws from N(0, sigma^2). sigma == 0 yields exact zeros.
std::vector<double> gaussian_draw(std::size_t n, double sigma, RngStream& rng);

} // namespace arnqs
