#include "posevid/rng.hpp"

#include <cmath>
#include <numbers>

namespace posevid {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ull)))
{
}

std::uint64_t CounterRng::next_u64()
{
    // Two rounds of mixing keep neighbouring counters decorrelated.
    return splitmix64(splitmix64(key_ + counter_++) ^ key_);
}

double CounterRng::uniform()
{
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::int64_t CounterRng::uniform_int(std::int64_t lo, std::int64_t hi)
{
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (span == 0) {
        return static_cast<std::int64_t>(next_u64());
    }
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t r = next_u64();
    while (r >= limit) {
        r = next_u64();
    }
    return lo + static_cast<std::int64_t>(r % span);
}

double CounterRng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return radius * std::cos(theta);
}

}  // namespace posevid
