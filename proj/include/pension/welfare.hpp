#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "core.hpp"
#include "popgen.hpp"

namespace pension {

// Cross-section the welfare formulas integrate over. omega is the relative
// retirement length (all ones unless survival weighting is on).
struct WelfareSample {
    std::vector<double> z, c1, c2, omega;
    std::vector<std::int64_t> id;

    std::size_t size() const { return z.size(); }

    static WelfareSample from_population(const std::vector<WorkerRecord>& pop) {
        WelfareSample s;
        s.z.reserve(pop.size());
        for (const auto& w : pop) {
            s.z.push_back(w.z);
            s.c1.push_back(w.c1);
            s.c2.push_back(w.c2);
            s.omega.push_back(1.0);
            s.id.push_back(w.id);
        }
        return s;
    }

    WelfareSample subset(const std::vector<std::size_t>& idx) const {
        WelfareSample s;
        for (auto i : idx) {
            s.z.push_back(z[i]);
            s.c1.push_back(c1[i]);
            s.c2.push_back(c2[i]);
            s.omega.push_back(omega[i]);
            s.id.push_back(id[i]);
        }
        return s;
    }

    void check() const {
        require(!z.empty(), "empty", "empty population");
        require(c1.size() == z.size() && c2.size() == z.size() && omega.size() == z.size(), "shape",
                "sample columns differ in length");
    }
};

struct MomentOptions {
    EulerMode euler_mode = EulerMode::Exact;
};

struct MomentSet {
    std::size_t n = 0;
    Variant variant = Variant::Linear;
    double implicit_tax = 0;  // PBS/PMAS under the chile rule

    double mean_z = 0;
    double mean_u1 = 0;
    double mean_d = 0;
    double cov_d_z = 0;
    double cov_u1_z = 0;
    double weighted_z = 0;       // E[(mu d + u'(c1)) z]
    double recipient_share = 0;  // share with a self-funded pension below PMAS
    double half_mad_z = 0;       // (1/2) E|z - mean z|

    // Terms used by the gradient; v = (1-mu) u'(c1) + mu theta u'(c2).
    double mean_u1z = 0;
    double mean_t = 0;        // E[theta u'(c2)]
    double mean_wz = 0;       // E[omega z]
    double mean_v = 0;        // E[v]
    double mean_wvz = 0;      // E[omega v z]
    double mean_wvkz = 0;     // E[omega v k z], k = 1 - phi' I
    double mean_wiz = 0;      // E[omega I z]
    double mean_kwtz = 0;     // E[k omega theta u'(c2) z]

    std::optional<std::vector<double>> survival_weights;
};

namespace detail {
struct WorkerTerms {
    double z, u, d, t, v, wz, u1z, dz, wvz, wvkz, wiz, kwtz, rec, wtd;
};
}  // namespace detail

inline MomentSet compute_moments(const WelfareSample& s, const BehavioralParams& b, const PolicyParams& p,
                                 const MomentOptions& opt = {}, unsigned threads = 0) {
    s.check();
    const std::size_t n = s.size();
    const bool chile = p.variant == Variant::Chile;
    const double phip = p.implicit_tax();
    std::vector<detail::WorkerTerms> t(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            double z = s.z[i], w = s.omega[i];
            require(s.c1[i] > 0 && s.c2[i] > 0, "consumption",
                    "non-positive consumption for worker " + std::to_string(s.id.empty() ? i : s.id[i]));
            double u = marginal_utility(s.c1[i], b.gamma);
            double d = euler_distance(s.c1[i], s.c2[i], b, p.R, opt.euler_mode);
            double th = u - d;
            double v = (1.0 - b.mpc) * u + b.mpc * th;
            double a = (1.0 - p.phi) * p.kappa * p.R * z;
            double I = (chile && a < p.PMAS) ? 1.0 : 0.0;
            double k = 1.0 - phip * I;
            t[i] = {z, u, d, th, v, w * z, u * z, d * z, w * v * z, w * v * k * z, w * I * z, k * w * th * z, I,
                    (b.mpc * d + u) * z};
        },
        threads);
    auto avg = [&](double detail::WorkerTerms::*f) { return pairwise_mean(n, [&](std::size_t i) { return t[i].*f; }); };
    MomentSet m;
    m.n = n;
    m.variant = p.variant;
    m.implicit_tax = phip;
    m.mean_z = avg(&detail::WorkerTerms::z);
    m.mean_u1 = avg(&detail::WorkerTerms::u);
    m.mean_d = avg(&detail::WorkerTerms::d);
    m.mean_t = avg(&detail::WorkerTerms::t);
    m.mean_v = avg(&detail::WorkerTerms::v);
    m.mean_wz = avg(&detail::WorkerTerms::wz);
    m.mean_u1z = avg(&detail::WorkerTerms::u1z);
    m.mean_wvz = avg(&detail::WorkerTerms::wvz);
    m.mean_wvkz = avg(&detail::WorkerTerms::wvkz);
    m.mean_wiz = avg(&detail::WorkerTerms::wiz);
    m.mean_kwtz = avg(&detail::WorkerTerms::kwtz);
    m.recipient_share = avg(&detail::WorkerTerms::rec);
    m.weighted_z = avg(&detail::WorkerTerms::wtd);
    m.cov_d_z = avg(&detail::WorkerTerms::dz) - m.mean_d * m.mean_z;
    m.cov_u1_z = m.mean_u1z - m.mean_u1 * m.mean_z;
    const double zb = m.mean_z;
    m.half_mad_z = 0.5 * pairwise_mean(n, [&](std::size_t i) { return std::abs(t[i].z - zb); });
    bool weighted = false;
    for (double w : s.omega) weighted = weighted || w != 1.0;
    if (weighted) m.survival_weights = s.omega;
    require(m.mean_z > 0, "range", "mean earnings must be positive");
    return m;
}

struct GradientDecomposition {
    Reform reform = Reform::Kappa;
    double social_insurance = 0;
    double inter_worker = 0;
    double fiscal_externality = 0;
    double bias_correction = 0;
    double total = 0;
    double money_metric_total = std::numeric_limits<double>::quiet_NaN();
    double mechanical_transfer = std::numeric_limits<double>::quiet_NaN();
    double gain_per_dollar = std::numeric_limits<double>::quiet_NaN();
    double semi_elasticity = 0;  // (dz/dparam)/z
};

struct GradientOptions {
    int bias_mu_power = 1;
    bool retired_numeraire = false;
};

struct MoneyMetric {
    double money_metric_total = 0, mechanical_transfer = 0, gain_per_dollar = 0;
};

inline double mechanical_transfer(Reform r, const MomentSet& m, const PolicyParams& p) {
    return r == Reform::Kappa ? m.mean_z : p.kappa * p.R * m.half_mad_z;
}

inline MoneyMetric money_metric(const GradientDecomposition& g, const MomentSet& m, const PolicyParams& p,
                                bool retired_numeraire = false) {
    double numeraire = retired_numeraire ? m.mean_t : m.mean_u1;
    require(numeraire > 0, "range", "numeraire marginal utility must be positive");
    MoneyMetric out;
    out.money_metric_total = g.total / numeraire;
    out.mechanical_transfer = mechanical_transfer(g.reform, m, p);
    require(out.mechanical_transfer > 0, "degenerate", "zero mechanical transfer: nothing to reallocate");
    out.gain_per_dollar = out.money_metric_total / out.mechanical_transfer;
    return out;
}

// Marginal welfare effect of raising kappa or phi, split into its components.
// Retirement terms carry omega; the lump sum is a per-capita lifetime amount.
inline GradientDecomposition gradient(const PolicyParams& p, const BehavioralParams& b, const MomentSet& M, Reform r,
                                      const GradientOptions& opt = {}) {
    require(M.variant == p.variant, "mismatch", "moments were computed under a different pension rule");
    const double m = p.link();
    const double phip = M.implicit_tax;
    const double dm = r == Reform::Kappa ? 1.0 - p.phi : -p.kappa;
    const double dpk = r == Reform::Kappa ? p.phi : p.kappa;
    GradientDecomposition g;
    g.reform = r;
    g.semi_elasticity = earnings_semi_elasticity(p, b, M.mean_wz, r);
    const double L = g.semi_elasticity;
    double mech = (r == Reform::Kappa ? -M.mean_u1z : 0.0) + (M.mean_wvkz + M.mean_v * phip * M.mean_wiz) * dm +
                  M.mean_v * M.mean_wz * dpk;
    g.social_insurance = r == Reform::Kappa ? M.mean_wvz - M.mean_u1z : 0.0;
    g.inter_worker = mech - g.social_insurance;
    g.fiscal_externality = M.mean_v * (p.phi * p.kappa * M.mean_wz + p.tau * M.mean_z + phip * m * M.mean_wiz) * L;
    g.bias_correction = std::pow(b.mpc, opt.bias_mu_power) * (1.0 - b.beta) * m * M.mean_kwtz * L;
    g.total = g.social_insurance + g.inter_worker + g.fiscal_externality + g.bias_correction;
    double numeraire = opt.retired_numeraire ? M.mean_t : M.mean_u1;
    g.money_metric_total = g.total / numeraire;
    g.mechanical_transfer = mechanical_transfer(r, M, p);
    if (g.mechanical_transfer > 0) g.gain_per_dollar = g.money_metric_total / g.mechanical_transfer;
    return g;
}

// Share of the phi-reform behavioural cost due to the bias term.
inline double bias_share(const GradientDecomposition& g) {
    return g.bias_correction / (g.bias_correction + g.fiscal_externality);
}

struct ModelState {
    std::vector<double> z, c1, c2, self_funded, subsidy;
    double lump_sum = 0;  // per-capita lifetime amount b
};

// Reduced-form economy anchored at an observed status quo. Earnings respond to
// the net-of-tax rate, the link m and the statutory lump sum with constant
// elasticities; marginal retirement income is split mu / (1-mu) between
// retirement and active consumption; the budget is balanced through b.
class WelfareModel {
public:
    WelfareModel(WelfareSample sample, PolicyParams anchor, BehavioralParams behav, double frisch = 0.5)
        : s_(std::move(sample)), pa_(anchor), b_(behav), frisch_(frisch) {
        s_.check();
        pa_.validate();
        b_.validate();
        const std::size_t n = s_.size();
        wz_a_ = pairwise_mean(n, [&](std::size_t i) { return s_.omega[i] * s_.z[i]; });
        zbar_a_ = mean(s_.z);
        std::vector<double> a, sub;
        pensions(pa_, s_.z, a, sub);
        sub_a_ = pairwise_mean(n, [&](std::size_t i) { return s_.omega[i] * sub[i]; });
        bstat_a_ = statutory_lump_sum(pa_, wz_a_);
        const double na = pa_.net_of_tax(), ma = pa_.link(), phip = pa_.implicit_tax();
        y1_a_.resize(n);
        y2_a_.resize(n);
        wprime_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double w = s_.omega[i];
            y1_a_[i] = na * s_.z[i];
            y2_a_[i] = a[i] + sub[i] + bstat_a_ / w;
            double U = marginal_utility(s_.c1[i], b_.gamma);
            double T = b_.theta * marginal_utility(s_.c2[i], b_.gamma);
            double k = (pa_.variant == Variant::Chile && a[i] < pa_.PMAS) ? 1.0 - phip : 1.0;
            // Marginal disutility at the anchor equals the worker's perceived marginal return.
            wprime_[i] = na * U + w * k * ma * ((1.0 - b_.mpc) * U + b_.mpc * b_.beta * T);
        }
    }

    const WelfareSample& sample() const { return s_; }
    const PolicyParams& anchor() const { return pa_; }
    const BehavioralParams& behavioral() const { return b_; }
    double frisch() const { return frisch_; }

    static double statutory_lump_sum(const PolicyParams& p, double wz) { return p.phi * p.kappa * p.R * wz + p.E_bar; }

    static void pensions(const PolicyParams& p, const std::vector<double>& z, std::vector<double>& a,
                         std::vector<double>& sub) {
        a.resize(z.size());
        sub.assign(z.size(), 0.0);
        for (std::size_t i = 0; i < z.size(); ++i) {
            a[i] = (1.0 - p.phi) * p.kappa * p.R * z[i];
            if (p.variant == Variant::Chile) sub[i] = std::max(0.0, p.PBS - p.implicit_tax() * a[i]);
        }
    }

    // Earnings scale relative to the anchor under policy p.
    double earnings_scale(const PolicyParams& p) const {
        double n = p.net_of_tax(), m = p.link(), na = pa_.net_of_tax(), ma = pa_.link();
        require(n > 0, "range", "net-of-tax rate must be positive");
        double sc = std::pow(n / na, b_.eps_net_of_tax);
        if (b_.eps_link != 0.0) {
            require(m > 0 && ma > 0, "singular", "link m = 0 with a non-zero link elasticity");
            sc *= std::pow(m / ma, b_.eps_link);
        }
        if (b_.eps_benefit != 0.0) {
            double bs = statutory_lump_sum(p, wz_a_);
            require(bs > 0 && bstat_a_ > 0, "singular", "lump sum must stay positive with a non-zero benefit elasticity");
            sc *= std::pow(bs / bstat_a_, -b_.eps_benefit);
        }
        return sc;
    }

    ModelState state(const PolicyParams& p, bool check_positive = true) const {
        const std::size_t n = s_.size();
        ModelState st;
        double sc = earnings_scale(p);
        st.z.resize(n);
        for (std::size_t i = 0; i < n; ++i) st.z[i] = sc * s_.z[i];
        pensions(p, st.z, st.self_funded, st.subsidy);
        double wz = pairwise_mean(n, [&](std::size_t i) { return s_.omega[i] * st.z[i]; });
        double zb = mean(st.z);
        double ws = pairwise_mean(n, [&](std::size_t i) { return s_.omega[i] * st.subsidy[i]; });
        st.lump_sum = statutory_lump_sum(p, wz) + p.tau * p.R * (zb - zbar_a_) - (ws - sub_a_);
        st.c1.resize(n);
        st.c2.resize(n);
        const double nt = p.net_of_tax(), mu = b_.mpc;
        for (std::size_t i = 0; i < n; ++i) {
            double w = s_.omega[i];
            double dy1 = nt * st.z[i] - y1_a_[i];
            double dy2 = st.self_funded[i] + st.subsidy[i] + st.lump_sum / w - y2_a_[i];
            st.c1[i] = s_.c1[i] + dy1 + (1.0 - mu) * w * dy2 / p.R;
            st.c2[i] = s_.c2[i] + mu * dy2;
            if (check_positive && !(st.c1[i] > 0 && st.c2[i] > 0))
                throw Error("consumption", "consumption driven non-positive for worker " +
                                               std::to_string(s_.id.empty() ? static_cast<std::int64_t>(i) : s_.id[i]));
        }
        return st;
    }

    // Utilitarian welfare per worker: u(c1) + omega (theta/R) u(c2) - disutility of earnings.
    double welfare(const PolicyParams& p) const {
        ModelState st = state(p);
        const double e = frisch_, q = 1.0 + 1.0 / e;
        const double g = b_.gamma, th = b_.theta / p.R;
        return pairwise_mean(s_.size(), [&](std::size_t i) {
            double za = s_.z[i];
            double dis = wprime_[i] * za * std::pow(st.z[i] / za, q) / q;
            return utility(st.c1[i], g) + s_.omega[i] * th * utility(st.c2[i], g) - dis;
        });
    }

    // Linear-rule policy reproducing state(p)'s lump sum exactly, with the
    // sample re-expressed at that state. Used to take gradients away from the anchor.
    std::pair<WelfareSample, PolicyParams> evaluated_at(const PolicyParams& p) const {
        ModelState st = state(p);
        WelfareSample out = s_;
        out.z = st.z;
        out.c1 = st.c1;
        out.c2 = st.c2;
        PolicyParams q = p;
        double wz = pairwise_mean(s_.size(), [&](std::size_t i) { return s_.omega[i] * st.z[i]; });
        q.E_bar = st.lump_sum - p.phi * p.kappa * p.R * wz;
        return {std::move(out), q};
    }

private:
    WelfareSample s_;
    PolicyParams pa_;
    BehavioralParams b_;
    double frisch_;
    double wz_a_ = 0, zbar_a_ = 0, sub_a_ = 0, bstat_a_ = 0;
    std::vector<double> y1_a_, y2_a_, wprime_;
};

inline double evaluate_welfare(const PolicyParams& p, const WelfareModel& model) { return model.welfare(p); }

// Relative expected retirement length by earnings group, normalised to mean one.
struct LifeTable {
    double below_median = 1.0;
    double above_median = 1.0;
};

// True for the lower floor(n/2) workers by z, ties broken by id.
inline std::vector<char> below_median(const std::vector<double>& z, const std::vector<std::int64_t>& id) {
    const std::size_t n = z.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return z[a] != z[b] ? z[a] < z[b] : (id.empty() ? a < b : id[a] < id[b]);
    });
    std::vector<char> out(n, 0);
    for (std::size_t r = 0; r < n / 2; ++r) out[order[r]] = 1;
    return out;
}

inline std::vector<double> survival_weights(const std::vector<double>& z, const std::vector<std::int64_t>& id,
                                            const LifeTable& lt) {
    require(lt.below_median > 0 && lt.above_median > 0, "missing", "life table needs positive retirement lengths");
    auto low = below_median(z, id);
    std::vector<double> w(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) w[i] = low[i] ? lt.below_median : lt.above_median;
    double mw = mean(w);
    for (auto& x : w) x /= mw;
    return w;
}

inline MomentSet le_weighted_moments(WelfareSample s, const BehavioralParams& b, const PolicyParams& p,
                                     const LifeTable& lt, const MomentOptions& opt = {}) {
    s.check();
    s.omega = survival_weights(s.z, s.id, lt);
    return compute_moments(s, b, p, opt);
}

}  // namespace pension
