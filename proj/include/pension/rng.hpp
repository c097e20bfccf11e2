#pragma once

#include <cmath>
#include <cstdint>

namespace pension {

// Purpose tags keep streams for different draws of the same worker disjoint.
enum class Purpose : std::uint64_t {
    Earnings = 1,
    Consumption = 2,
    Drop = 3,
    Demographics = 4,
    Savings = 5,
    Recipient = 6,
    Mortality = 7,
    PanelNoise = 8,
    Survey = 9,
    Bootstrap = 10,
    MonteCarlo = 11,
    Multistart = 12,
    Design = 13,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Counter-based stream: the k-th draw is a pure function of (seed, id, purpose, k).
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t id, Purpose purpose)
        : key_(splitmix64(splitmix64(seed ^ 0xA0761D6478BD642FULL) ^ splitmix64(id + 0x632BE59BD9B4E019ULL) ^
                          (static_cast<std::uint64_t>(purpose) * 0xE7037ED1A0B428DBULL))) {}

    std::uint64_t next() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (++ctr_)); }

    // In (0, 1), never exactly 0 or 1.
    double uniform() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() {
        double u1 = uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

private:
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace pension
