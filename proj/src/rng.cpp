#include "arnqs/rng.hpp"

#include <cmath>

namespace arnqs {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept
{
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}

} // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed)
{
    std::uint64_t x = seed;
    for (auto& s : state_) {
        s = splitmix64(x);
    }
}

std::uint64_t RngStream::next_u64() noexcept
{
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform() noexcept
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::gaussian() noexcept
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept
{
    // Lemire's nearly-divisionless rejection.
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            m = static_cast<__uint128_t>(next_u64()) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::vector<double> gaussian_draw(std::size_t n, double sigma, RngStream& rng)
{
    std::vector<double> out(n, 0.0);
    if (sigma == 0.0) {
        return out;
    }
    for (auto& x : out) {
        x = sigma * rng.gaussian();
    }
    return out;
}

} // namespace arnqs
