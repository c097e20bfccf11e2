#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace pension;
using testing_support::random_sample;

namespace {
PolicyParams linear(double k, double p) {
    PolicyParams q;
    q.kappa = k;
    q.phi = p;
    q.tau = 0.05;
    q.E_bar = 0.02;
    return q;
}

PolicyParams chile(double k) {
    PolicyParams q = linear(k, 0.0);
    q.variant = Variant::Chile;
    q.PBS = 0.04;
    q.PMAS = 0.12;
    return q;
}
}  // namespace

TEST(Moments, ComponentsSumToTotal) {
    auto s = random_sample(3000, 1);
    BehavioralParams b;
    for (auto p : {linear(0.1, 0.3), chile(0.1)}) {
        MomentSet M = compute_moments(s, b, p);
        for (Reform r : {Reform::Kappa, Reform::Phi}) {
            auto g = gradient(p, b, M, r);
            EXPECT_NEAR(g.total, g.social_insurance + g.inter_worker + g.fiscal_externality + g.bias_correction, 1e-14);
            auto mm = money_metric(g, M, p);
            EXPECT_DOUBLE_EQ(mm.gain_per_dollar, g.gain_per_dollar);
        }
    }
}

TEST(Moments, RecipientShareOnlyUnderChile) {
    auto s = random_sample(3000, 2);
    BehavioralParams b;
    EXPECT_EQ(compute_moments(s, b, linear(0.1, 0.0)).recipient_share, 0.0);
    double share = compute_moments(s, b, chile(0.1)).recipient_share;
    EXPECT_GT(share, 0.0);
    EXPECT_LT(share, 1.0);
}

TEST(Moments, ThreadCountDoesNotChangeBits) {
    auto s = random_sample(5000, 3);
    BehavioralParams b;
    auto ref = compute_moments(s, b, chile(0.1), {}, 1);
    for (unsigned t : {2u, 5u}) {
        auto m = compute_moments(s, b, chile(0.1), {}, t);
        EXPECT_EQ(m.mean_wvz, ref.mean_wvz);
        EXPECT_EQ(m.cov_d_z, ref.cov_d_z);
        EXPECT_EQ(m.half_mad_z, ref.half_mad_z);
    }
}

TEST(Moments, RejectNonPositiveConsumption) {
    auto s = random_sample(10, 4);
    s.c2[3] = 0.0;
    EXPECT_THROW(compute_moments(s, BehavioralParams{}, linear(0.1, 0.1)), Error);
}

TEST(Gradient, VariantMismatchRejected) {
    auto s = random_sample(100, 5);
    BehavioralParams b;
    MomentSet M = compute_moments(s, b, linear(0.1, 0.1));
    EXPECT_THROW(gradient(chile(0.1), b, M, Reform::Kappa), Error);
}

// Property: analytic gradients agree with finite differences of model welfare at random designs.
TEST(Gradient, AgreesWithWelfareDifferences) {
    auto s = random_sample(2000, 6);
    Stream r(6, 1, Purpose::MonteCarlo);
    BehavioralParams b;
    for (int t = 0; t < 12; ++t) {
        PolicyParams p = t % 2 ? chile(0.05 + 0.2 * r.uniform()) : linear(0.05 + 0.2 * r.uniform(), 0.1 + 0.8 * r.uniform());
        if (t % 2) p.phi = 0.1 + 0.8 * r.uniform();
        WelfareModel model(s, p, b);
        MomentSet M = compute_moments(s, b, p);
        for (Reform rf : {Reform::Kappa, Reform::Phi}) {
            // Small enough that no worker crosses the subsidy kink inside the stencil.
            const double h = 1e-6;
            PolicyParams up = p, dn = p;
            (rf == Reform::Kappa ? up.kappa : up.phi) += h;
            (rf == Reform::Kappa ? dn.kappa : dn.phi) -= h;
            double fd = (model.welfare(up) - model.welfare(dn)) / (2 * h);
            EXPECT_NEAR(gradient(p, b, M, rf).total, fd, 1e-6 * std::abs(fd)) << t;
        }
    }
}

TEST(Gradient, SurvivalWeightsAlsoAgreeWithWelfare) {
    auto s = random_sample(2000, 7);
    s.omega = survival_weights(s.z, s.id, LifeTable{17.0, 20.0});
    BehavioralParams b;
    PolicyParams p = linear(0.12, 0.4);
    WelfareModel model(s, p, b);
    MomentSet M = compute_moments(s, b, p);
    const double h = 1e-5;
    PolicyParams up = p, dn = p;
    up.phi += h;
    dn.phi -= h;
    double fd = (model.welfare(up) - model.welfare(dn)) / (2 * h);
    EXPECT_NEAR(gradient(p, b, M, Reform::Phi).total, fd, 1e-5 * std::abs(fd));
}

TEST(Gradient, BiasTermScalesWithPresentFocus) {
    auto s = random_sample(2000, 8);
    PolicyParams p = linear(0.1, 0.3);
    BehavioralParams b;
    MomentSet M = compute_moments(s, b, p);
    b.beta = 0.9;
    double a = gradient(p, b, M, Reform::Phi).bias_correction;
    b.beta = 0.8;
    double c = gradient(p, b, M, Reform::Phi).bias_correction;
    EXPECT_NEAR(c, 2 * a, 1e-12 * std::abs(c));
    GradientOptions sq;
    sq.bias_mu_power = 2;
    EXPECT_NEAR(gradient(p, b, M, Reform::Phi, sq).bias_correction, b.mpc * c, 1e-12 * std::abs(c));
}

TEST(Gradient, ProgressivityHasNoInsuranceTerm) {
    auto s = random_sample(500, 9);
    BehavioralParams b;
    PolicyParams p = linear(0.1, 0.3);
    EXPECT_EQ(gradient(p, b, compute_moments(s, b, p), Reform::Phi).social_insurance, 0.0);
}

TEST(SurvivalWeights, MeanOneAndOrdered) {
    auto s = random_sample(1001, 10);
    auto w = survival_weights(s.z, s.id, LifeTable{17.0, 20.0});
    EXPECT_NEAR(mean(w), 1.0, 1e-14);
    auto low = below_median(s.z, s.id);
    EXPECT_EQ(std::count(low.begin(), low.end(), 1), 500);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(w[i] < 1.0, low[i] == 1);
    EXPECT_THROW(survival_weights(s.z, s.id, LifeTable{0.0, 1.0}), Error);
}

TEST(WelfareModel, AnchorReproducesObservedConsumption) {
    auto s = random_sample(500, 11);
    PolicyParams p = chile(0.1);
    WelfareModel model(s, p, BehavioralParams{});
    auto st = model.state(p);
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_NEAR(st.c1[i], s.c1[i], 1e-14);
        EXPECT_NEAR(st.c2[i], s.c2[i], 1e-14);
        EXPECT_NEAR(st.z[i], s.z[i], 1e-14);
    }
}

TEST(WelfareModel, EvaluatedAtKeepsLumpSum) {
    auto s = random_sample(500, 12);
    PolicyParams p = chile(0.1);
    WelfareModel model(s, p, BehavioralParams{});
    PolicyParams q = linear(0.2, 0.5);
    auto [s2, q2] = model.evaluated_at(q);
    WelfareModel m2(s2, q2, BehavioralParams{});
    EXPECT_NEAR(m2.state(q2).lump_sum, model.state(q).lump_sum, 1e-13);
}

TEST(MoneyMetric, DegenerateTransferRejected) {
    WelfareSample s;
    for (int i = 0; i < 4; ++i) {
        s.z.push_back(1.0);
        s.c1.push_back(1.0);
        s.c2.push_back(0.9);
        s.omega.push_back(1.0);
        s.id.push_back(i);
    }
    BehavioralParams b;
    PolicyParams p = linear(0.1, 0.3);
    MomentSet M = compute_moments(s, b, p);
    EXPECT_THROW(money_metric(gradient(p, b, M, Reform::Phi), M, p), Error);
    EXPECT_TRUE(std::isnan(gradient(p, b, M, Reform::Phi).gain_per_dollar));
}

TEST(LeWeighted, RaisesPhiGainWhenDropFallsWithEarnings) {
    auto s = random_sample(20000, 13);
    BehavioralParams b;
    PolicyParams p = chile(0.1);
    MomentSet M0 = compute_moments(s, b, p);
    MomentSet M1 = le_weighted_moments(s, b, p, LifeTable{17.0, 20.0});
    EXPECT_TRUE(M1.survival_weights.has_value());
    EXPECT_GT(gradient(p, b, M1, Reform::Phi).gain_per_dollar, gradient(p, b, M0, Reform::Phi).gain_per_dollar);
}
