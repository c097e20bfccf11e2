#pragma once

#include <cmath>
#include <string>

#include <pension/pension.hpp>

namespace testing_support {

inline std::string example_config() { return std::string(PENSION_SOURCE_DIR) + "/config/example.cfg"; }
inline std::string small_config() { return std::string(PENSION_SOURCE_DIR) + "/config/small.cfg"; }

inline pension::ScenarioConfig small_scenario(std::size_t n = 3000) {
    auto c = pension::Config::load(small_config());
    c.set("n_workers", std::to_string(n));
    return pension::ScenarioConfig::from_config(c);
}

// Log-normal earnings, consumption rising in earnings, drop falling in earnings.
inline pension::WelfareSample random_sample(std::size_t n, std::uint64_t seed) {
    using namespace pension;
    Stream r(seed, 0, Purpose::MonteCarlo);
    WelfareSample s;
    for (std::size_t i = 0; i < n; ++i) {
        double lz = 0.7 * r.normal();
        double lc1 = std::log(0.85) + 0.6 * lz + 0.2 * r.normal();
        double drop = 0.15 - 0.08 * lz + 0.1 * r.normal();
        s.z.push_back(std::exp(lz));
        s.c1.push_back(std::exp(lc1));
        s.c2.push_back(std::exp(lc1 - drop));
        s.omega.push_back(1.0);
        s.id.push_back(static_cast<std::int64_t>(i + 1));
    }
    return s;
}

}  // namespace testing_support
