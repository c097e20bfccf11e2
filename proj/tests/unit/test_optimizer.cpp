#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace pension;
using testing_support::random_sample;

namespace {
// Gradient of a concave quadratic with its peak at (a, b).
FocMap quadratic(double a, double b) {
    return [=](double k, double p) -> Vec2 { return {-2.0 * (k - a) - 0.3 * (p - b), -0.3 * (k - a) - 1.0 * (p - b)}; };
}
}  // namespace

TEST(SolveOptimum, FindsQuadraticPeak) {
    Box box;
    auto d = solve_optimum(quadratic(0.2, 0.6), box);
    EXPECT_NEAR(d.kappa_star, 0.2, 1e-10);
    EXPECT_NEAR(d.phi_star, 0.6, 1e-10);
    EXPECT_LE(d.residual_norm(), 1e-8);
    EXPECT_EQ(d.starts_converged, 5);
}

TEST(SolveOptimum, NoRootInBox) {
    FocMap F = [](double, double) -> Vec2 { return {1.0, 1.0}; };
    try {
        solve_optimum(F, Box{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "no_root");
    }
}

TEST(SolveOptimum, DisagreeingStartsReported) {
    // Two separated roots in kappa.
    FocMap F = [](double k, double p) -> Vec2 { return {(k - 0.1) * (k - 0.5), p - 0.5}; };
    SolverOptions opt;
    opt.starts = 8;
    try {
        solve_optimum(F, Box{}, opt);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "non_unique");
    }
}

TEST(SolveOptimum, NonFiniteRegionsAreAvoided) {
    // The map is undefined for kappa > 0.5; Newton must stay in the defined part.
    FocMap F = [](double k, double p) -> Vec2 {
        if (k > 0.5) throw Error("singular", "undefined");
        return {-(k - 0.3), -(p - 0.4)};
    };
    auto d = solve_optimum(F, Box{});
    EXPECT_NEAR(d.kappa_star, 0.3, 1e-9);
}

TEST(HessianDiagnostics, QuadraticCurvature) {
    WelfareMap W = [](double k, double p) { return -(k - 0.2) * (k - 0.2) - 0.5 * (p - 0.6) * (p - 0.6) + 0.1 * k * p; };
    auto h = hessian_diagnostics(W, 0.2, 0.6, 1e-3, 1e-3);
    EXPECT_NEAR(h.d2_kappa, -2.0, 1e-6);
    EXPECT_NEAR(h.d2_phi, -1.0, 1e-6);
    EXPECT_NEAR(h.cross, 0.1, 1e-6);
    EXPECT_TRUE(h.concave());
}

TEST(WarmSolve, AgreesWithFullSolve) {
    Box box;
    auto F = quadratic(0.25, 0.45);
    auto J = foc_jacobian(F, box, 0.3, 0.5);
    auto d = warm_solve(F, box, SolverOptions{}, Vec2{0.3, 0.5}, J);
    EXPECT_NEAR(d.kappa_star, 0.25, 1e-9);
    EXPECT_NEAR(d.phi_star, 0.45, 1e-9);
}

TEST(DesignProblem, CalibratedOptimumIsConcaveAndInterior) {
    auto cfg = testing_support::small_scenario(4000);
    auto s = WelfareSample::from_population(generate_population(cfg));
    WelfareModel model(s, cfg.policy, cfg.behavioral);
    auto d = DesignProblem(model).solve(Box{});
    EXPECT_LE(d.residual_norm(), 1e-8);
    EXPECT_TRUE(d.concave);
    EXPECT_GT(d.kappa_star, 0.02);
    EXPECT_LT(d.kappa_star, 0.6);
    EXPECT_GT(d.progressivity_share, progressivity_share(cfg.policy, s));
}

TEST(PlantOptimum, RecoveredBySolver) {
    auto s = random_sample(3000, 41);
    BehavioralParams b;
    auto ps = plant_optimum(s, b, 0.3, 0.5, 0.05);
    WelfareModel model(ps.sample, ps.policy, b);
    auto d = DesignProblem(model).solve(Box{});
    EXPECT_NEAR(d.kappa_star, 0.3, 1e-7);
    EXPECT_NEAR(d.phi_star, 0.5, 1e-7);
}

TEST(Progressivity, LumpSumIsHalfAndMonotone) {
    auto s = random_sample(2000, 42);
    PolicyParams p;
    p.phi = 1.0;
    EXPECT_DOUBLE_EQ(progressivity_share(p, s), 0.5);
    double prev = 0;
    for (int k = 0; k <= 10; ++k) {
        p.phi = k / 10.0;
        double v = progressivity_share(p, s);
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Quantile, LinearInterpolation) {
    std::vector<double> v{1, 2, 3, 4, 5};
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.0), 1);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 5);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.375), 2.5);
    EXPECT_THROW(quantile_sorted({}, 0.5), Error);
}

TEST(ConvexHull, SquareWithInteriorPoints) {
    std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.2, 0.7}, {0.5, 0}};
    auto h = convex_hull(pts);
    EXPECT_EQ(h.size(), 4u);
}

TEST(MahalanobisRegion, DropsOutlier) {
    std::vector<Vec2> pts;
    Stream r(43, 0, Purpose::MonteCarlo);
    for (int i = 0; i < 99; ++i) pts.push_back({r.normal(), r.normal()});
    pts.push_back({50, 50});
    for (const auto& v : mahalanobis_region(pts)) EXPECT_LT(v[0], 49);
}

TEST(PairsBootstrap, DeterministicAcrossThreads) {
    auto s = random_sample(500, 44);
    Pipeline mean_z = [](const WelfareSample& x) {
        OptimalDesign d;
        d.kappa_star = mean(x.z);
        d.phi_star = mean(x.c1);
        return d;
    };
    auto a = pairs_bootstrap(s, mean_z, 64, 9, 1);
    auto b = pairs_bootstrap(s, mean_z, 64, 9, 4);
    ASSERT_EQ(a.replicates.size(), 64u);
    for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(a.replicates[i]->kappa_star, b.replicates[i]->kappa_star);
    EXPECT_EQ(a.kappa.lo, b.kappa.lo);
    EXPECT_LT(a.kappa.lo, mean(s.z));
    EXPECT_GT(a.kappa.hi, mean(s.z));
}

TEST(PairsBootstrap, FailureBudget) {
    auto s = random_sample(100, 45);
    int calls = 0;
    Pipeline flaky = [&](const WelfareSample&) -> OptimalDesign {
        if (++calls % 2) throw Error("no_root", "x");
        return {};
    };
    EXPECT_THROW(pairs_bootstrap(s, flaky, 20, 1, 1), Error);
}

TEST(ComparativeStatics, OneRowPerGridPoint) {
    auto s = random_sample(2000, 46);
    PolicyParams p;
    p.variant = Variant::Chile;
    p.PBS = 0.04;
    p.PMAS = 0.12;
    p.E_bar = 0.02;
    auto pts = comparative_statics(s, p, BehavioralParams{}, SweepParam::Gamma, {2, 3, 4, 5});
    ASSERT_EQ(pts.size(), 4u);
    for (const auto& x : pts) {
        EXPECT_TRUE(std::isfinite(x.gain_kappa));
        EXPECT_TRUE(std::isfinite(x.gain_phi));
    }
    auto th = comparative_statics(s, p, BehavioralParams{}, SweepParam::Theta, {0.6, 0.9});
    EXPECT_GT(th[0].rational_drop, th[1].rational_drop);
}

namespace {
struct SweepFixture {
    ScenarioConfig cfg = testing_support::small_scenario(3000);
    WelfareSample s = WelfareSample::from_population(generate_population(cfg));
    std::vector<SweepPoint> run(SweepParam p, std::vector<double> grid) const {
        return comparative_statics(s, cfg.policy, cfg.behavioral, p, grid);
    }
};
}  // namespace

TEST(ComparativeStatics, GainsRiseWithRiskAversion) {
    auto pts = SweepFixture{}.run(SweepParam::Gamma, {1, 2, 4, 8});
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_GE(pts[i].gain_kappa, pts[i - 1].gain_kappa);
        EXPECT_GE(pts[i].gain_phi, pts[i - 1].gain_phi);
    }
}

TEST(ComparativeStatics, PhiGainInsensitiveToStateDependence) {
    auto pts = SweepFixture{}.run(SweepParam::Theta, {0.5, 0.6, 0.7, 0.8, 0.9, 1.0});
    double dk = std::abs(pts.back().gain_kappa - pts.front().gain_kappa);
    double dp = std::abs(pts.back().gain_phi - pts.front().gain_phi);
    EXPECT_LT(dp / dk, 0.01) << "phi change " << dp << ", kappa change " << dk;
    for (const auto& p : pts) EXPECT_NEAR(p.rational_drop, 1 - std::pow(p.value, 0.25), 1e-15);
}

TEST(ComparativeStatics, BiasVanishesAtFullSophistication) {
    auto pts = SweepFixture{}.run(SweepParam::Beta, {0.6, 0.7, 0.8, 0.9, 1.0});
    for (std::size_t i = 1; i < pts.size(); ++i) {
        EXPECT_LT(std::abs(pts[i].bias_kappa), std::abs(pts[i - 1].bias_kappa));
        EXPECT_LT(std::abs(pts[i].bias_phi), std::abs(pts[i - 1].bias_phi));
    }
    EXPECT_EQ(pts.back().bias_kappa, 0.0);
    EXPECT_EQ(pts.back().bias_phi, 0.0);
}
