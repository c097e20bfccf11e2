#include <gtest/gtest.h>

#include <set>

#include "helpers.hpp"

using namespace pension;

TEST(Stream, SameKeySameDraws) {
    Stream a(42, 7, Purpose::Earnings), b(42, 7, Purpose::Earnings);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
}

TEST(Stream, PurposesAndIdsAreDisjoint) {
    std::set<std::uint64_t> first;
    for (std::uint64_t id = 0; id < 50; ++id)
        for (auto p : {Purpose::Earnings, Purpose::Consumption, Purpose::Bootstrap}) first.insert(Stream(1, id, p).next());
    EXPECT_EQ(first.size(), 150u);
}

TEST(Stream, UniformStaysInsideOpenInterval) {
    Stream s(3, 0, Purpose::MonteCarlo);
    double lo = 1, hi = 0, sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double u = s.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Stream, NormalMoments) {
    Stream s(4, 0, Purpose::MonteCarlo);
    double m = 0, v = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double x = s.normal();
        m += x;
        v += x * x;
    }
    m /= n;
    v = v / n - m * m;
    EXPECT_NEAR(m, 0.0, 0.01);
    EXPECT_NEAR(v, 1.0, 0.01);
}

TEST(Stream, BelowCoversRange) {
    Stream s(5, 0, Purpose::Bootstrap);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) hits[s.below(7)]++;
    for (int h : hits) EXPECT_GT(h, 800);
}

TEST(ParallelFor, ResultIndependentOfThreadCount) {
    auto run = [](unsigned t) {
        std::vector<double> out(1000);
        parallel_for(out.size(), [&](std::size_t i) { out[i] = Stream(9, i, Purpose::MonteCarlo).normal(); }, t);
        return out;
    };
    auto ref = run(1);
    for (unsigned t : {2u, 3u, 8u}) EXPECT_EQ(run(t), ref);
}

TEST(ParallelFor, PropagatesExceptions) {
    EXPECT_THROW(parallel_for(
                     100, [](std::size_t i) { require(i != 57, "boom", "bad index"); }, 4),
                 Error);
}

TEST(PairwiseSum, MatchesExactSumOfIntegers) {
    std::vector<double> v(100001);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    EXPECT_EQ(sum(v), 100000.0 * 100001.0 / 2.0);
    EXPECT_EQ(mean(v), 50000.0);
}

TEST(Months, RoundTrip) {
    for (int y : {1944, 2008, 2019})
        for (int m = 1; m <= 12; ++m) {
            int mm = make_month(y, m);
            EXPECT_EQ(parse_month(format_month(mm)), mm);
            EXPECT_EQ(month_year(mm), y);
            EXPECT_EQ(month_of_year(mm), m);
        }
    EXPECT_EQ(format_month(make_month(2008, 7)), "2008-07");
}

TEST(Months, RejectsBadText) {
    EXPECT_THROW(parse_month("2008"), Error);
    EXPECT_THROW(parse_month("2008-13"), Error);
    EXPECT_THROW(parse_month("july"), Error);
}

TEST(ErrorType, CarriesCode) {
    try {
        require(false, "range", "x out of range");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "range");
        EXPECT_STREQ(e.what(), "x out of range");
    }
}
