#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "../common.hpp"
#include "../popgen.hpp"
#include "../welfare.hpp"

namespace pension::econ {

// log(100 * annual mortality rate) = intercept + slope * age.
struct MortalityFit {
    double intercept = 0, slope = 0;
    std::size_t ages_used = 0;
    std::size_t deaths = 0;
};

inline double hazard(const MortalityFit& f, double age) { return std::min(1.0, std::exp(f.intercept + f.slope * age) / 100.0); }

// Survival from `from_age`: element k is the probability of being alive at from_age + k.
inline std::vector<double> survival_curve(const std::function<double(int)>& h, int from_age, double floor = 1e-12,
                                          int max_years = 2000) {
    std::vector<double> s{1.0};
    double alive = 1.0;
    for (int k = 0; k < max_years && alive > floor; ++k) {
        alive *= 1.0 - std::clamp(h(from_age + k), 0.0, 1.0);
        s.push_back(alive);
    }
    return s;
}

// Curtate life expectancy: the sum of survival probabilities after from_age.
inline double life_expectancy(const std::function<double(int)>& h, int from_age) {
    auto s = survival_curve(h, from_age);
    double le = 0.0;
    for (std::size_t k = 1; k < s.size(); ++k) le += s[k];
    return le;
}

inline double life_expectancy(const MortalityFit& f, int from_age) {
    return life_expectancy([&](int a) { return hazard(f, a); }, from_age);
}

struct DeathRecord {
    int entry_age_months = 0;  // observation starts here
    std::optional<int> death_age_months;
    int censor_age_months = 0;  // end of follow-up if still alive
    int group = 0;
};

struct GroupMortality {
    int group = 0;
    MortalityFit fit;
    std::vector<double> survival;  // from the extrapolation age
    double life_expectancy = 0;
};

struct MortalityResult {
    std::vector<GroupMortality> groups;
    double retirement_gap = 0;  // LE(group 1) / LE(group 0) - 1
};

// Annual death rates by age within [fit_lo, fit_hi], then OLS of
// log(100 * rate) on age. Ages with no deaths are skipped.
inline MortalityFit fit_mortality(const std::vector<DeathRecord>& recs, int fit_lo, int fit_hi) {
    std::map<int, std::pair<double, double>> cells;  // age -> (exposed, deaths)
    for (const auto& r : recs) {
        int end = r.death_age_months ? *r.death_age_months : r.censor_age_months;
        int a0 = (r.entry_age_months + 11) / 12;
        for (int a = std::max(a0, fit_lo); a <= fit_hi && a * 12 <= end; ++a) {
            bool died = r.death_age_months && *r.death_age_months / 12 == a;
            bool observed_year = died || end >= (a + 1) * 12;
            if (!observed_year) break;
            auto& c = cells[a];
            c.first += 1;
            c.second += died ? 1 : 0;
        }
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    MortalityFit f;
    for (const auto& [a, c] : cells) {
        if (c.second <= 0 || c.first <= 0) continue;
        double y = std::log(100.0 * c.second / c.first);
        sx += a;
        sy += y;
        sxx += static_cast<double>(a) * a;
        sxy += a * y;
        n += 1;
        f.deaths += static_cast<std::size_t>(c.second);
    }
    require(f.deaths > 0, "empty", "zero deaths in a group");
    require(n >= 2, "empty", "need deaths at two or more ages");
    f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / n;
    f.ages_used = static_cast<std::size_t>(n);
    return f;
}

// Fits each group and extrapolates survival from `from_age`.
inline MortalityResult mortality_life_expectancy(const std::vector<DeathRecord>& recs, int n_groups, int fit_lo = 65,
                                                 int fit_hi = 95, int from_age = 65) {
    MortalityResult out;
    for (int g = 0; g < n_groups; ++g) {
        std::vector<DeathRecord> sub;
        for (const auto& r : recs)
            if (r.group == g) sub.push_back(r);
        GroupMortality gm;
        gm.group = g;
        gm.fit = fit_mortality(sub, fit_lo, fit_hi);
        gm.survival = survival_curve([&](int a) { return hazard(gm.fit, a); }, from_age);
        gm.life_expectancy = life_expectancy(gm.fit, from_age);
        out.groups.push_back(gm);
    }
    if (n_groups >= 2) out.retirement_gap = out.groups[1].life_expectancy / out.groups[0].life_expectancy - 1.0;
    return out;
}

// Death records from a simulated population: group 0 below the median of z, 1 above.
inline std::vector<DeathRecord> death_records(const std::vector<WorkerRecord>& pop, const ScenarioConfig& cfg) {
    std::vector<double> z;
    for (const auto& w : pop) z.push_back(w.z);
    std::vector<std::int64_t> ids;
    for (const auto& w : pop) ids.push_back(w.id);
    auto low = below_median(z, ids);
    std::vector<DeathRecord> out;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& w = pop[i];
        require(w.death_age_months.has_value(), "missing", "worker " + std::to_string(w.id) + " has no death age");
        DeathRecord r;
        r.entry_age_months = cfg.retire_age(w.gender);
        r.death_age_months = w.death_age_months;
        r.censor_age_months = 120 * 12;
        if (*w.death_age_months >= 120 * 12) r.death_age_months.reset();
        r.group = low[i] ? 0 : 1;
        out.push_back(r);
    }
    return out;
}

inline LifeTable life_table(const MortalityResult& m) {
    require(m.groups.size() >= 2, "missing", "need two groups for a life table");
    return {m.groups[0].life_expectancy, m.groups[1].life_expectancy};
}

}  // namespace pension::econ
