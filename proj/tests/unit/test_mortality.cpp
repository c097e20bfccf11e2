#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace pension;
using namespace pension::econ;

TEST(LifeExpectancy, ConstantHazardIsGeometric) {
    // With annual death probability q, sum_{k>=1} (1-q)^k = (1-q)/q.
    double q = 0.1;
    EXPECT_NEAR(life_expectancy([&](int) { return q; }, 65), (1 - q) / q, 1e-9);
}

TEST(LifeExpectancy, CertainDeathIsZero) { EXPECT_EQ(life_expectancy([](int) { return 1.0; }, 65), 0.0); }

TEST(LifeExpectancy, FallsWithHazardLevel) {
    MortalityFit lo{-9.0, 0.1}, hi{-8.5, 0.1};
    EXPECT_GT(life_expectancy(lo, 65), life_expectancy(hi, 65));
}

TEST(SurvivalCurve, StartsAtOneAndDecreases) {
    auto s = survival_curve([](int a) { return 0.01 * (a - 60); }, 65);
    EXPECT_EQ(s.front(), 1.0);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_LE(s[k], s[k - 1]);
}

TEST(FitMortality, RecoversGompertzFromLargeCohort) {
    MortalityFit truth{-5.0, 0.08};
    Stream r(77, 0, Purpose::MonteCarlo);
    std::vector<DeathRecord> recs;
    for (int i = 0; i < 60000; ++i) {
        DeathRecord d;
        d.entry_age_months = 65 * 12;
        d.censor_age_months = 120 * 12;
        for (int a = 65; a < 120; ++a)
            if (r.uniform() < hazard(truth, a)) {
                d.death_age_months = a * 12 + static_cast<int>(r.below(12));
                break;
            }
        recs.push_back(d);
    }
    auto f = fit_mortality(recs, 65, 95);
    EXPECT_NEAR(f.slope, truth.slope, 0.01);
    EXPECT_NEAR(life_expectancy(f, 65), life_expectancy(truth, 65), 0.3);
}

TEST(FitMortality, NoDeathsRejected) {
    std::vector<DeathRecord> recs(10, DeathRecord{65 * 12, std::nullopt, 120 * 12, 0});
    try {
        fit_mortality(recs, 65, 95);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "empty");
    }
}

TEST(MortalityPipeline, LowEarnersDieSooner) {
    auto cfg = testing_support::small_scenario(20000);
    cfg.mortality.simulate = true;
    auto pop = generate_population(cfg);
    auto m = mortality_life_expectancy(death_records(pop, cfg), 2);
    ASSERT_EQ(m.groups.size(), 2u);
    EXPECT_GT(m.retirement_gap, 0.0);
    auto lt = life_table(m);
    EXPECT_LT(lt.below_median, lt.above_median);
}

TEST(MortalityPipeline, MissingDeathAgesRejected) {
    auto cfg = testing_support::small_scenario(20);
    cfg.mortality.simulate = false;
    auto pop = generate_population(cfg);
    EXPECT_THROW(death_records(pop, cfg), Error);
}

TEST(SurvivalWeights, RatioMatchesLifeTable) {
    std::vector<double> z{1, 2, 3, 4, 5, 6};
    std::vector<std::int64_t> id{1, 2, 3, 4, 5, 6};
    auto w = survival_weights(z, id, LifeTable{16, 19});
    EXPECT_NEAR(mean(w), 1.0, 1e-15);
    EXPECT_LT(w[0], w[5]);
    EXPECT_NEAR(w[5] / w[0], 19.0 / 16.0, 1e-15);
}

TEST(BelowMedian, TiesBrokenById) {
    std::vector<double> z{2, 1, 1, 1};
    std::vector<std::int64_t> id{1, 9, 3, 5};
    auto low = below_median(z, id);
    EXPECT_EQ(low, (std::vector<char>{0, 0, 1, 1}));
}
