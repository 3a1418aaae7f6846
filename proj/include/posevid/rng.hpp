#pragma once

#include <cstdint>

namespace posevid {

// Counter-based generator: the n-th draw of stream (seed, stream) is a pure
// function of (seed, stream, n). Distributions are implemented here rather
// than taken from <random> so outputs match across standard libraries.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [lo, hi] inclusive. Requires lo <= hi.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller; caches the second variate.
    double normal();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace posevid
