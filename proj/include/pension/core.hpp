#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace pension {

enum class Variant { Linear, Chile };

inline const char* to_string(Variant v) { return v == Variant::Linear ? "linear" : "chile"; }

struct PolicyParams {
    double kappa = 0.10;
    double phi = 0.0;
    double tau = 0.0;
    double R = 1.042;
    double E_bar = 0.0;
    Variant variant = Variant::Linear;
    double PBS = 0.0;
    double PMAS = 0.0;

    // Implicit tax on self-funded pensions below PMAS.
    double implicit_tax() const { return variant == Variant::Chile ? PBS / PMAS : 0.0; }
    double net_of_tax() const { return 1.0 - tau - kappa; }
    double link() const { return kappa * (1.0 - phi); }

    void validate() const {
        require(kappa >= 0 && kappa <= 1, "range", "kappa must lie in [0,1]");
        require(phi >= 0 && phi <= 1, "range", "phi must lie in [0,1]");
        require(tau >= 0 && tau < 1, "range", "tau must lie in [0,1)");
        require(kappa + tau < 1, "range", "kappa + tau must be below 1");
        require(R > 0, "range", "R must be positive");
        if (variant == Variant::Chile) {
            require(PBS >= 0, "range", "PBS must be non-negative");
            require(PMAS >= PBS && PMAS > 0, "range", "PMAS must be positive and at least PBS");
        }
    }
};

struct BehavioralParams {
    double eps_net_of_tax = 0.38;
    double eps_link = 0.22;
    double eps_benefit = 0.11;  // magnitude; earnings fall when the benefit rises
    double mpc = 0.79;
    double gamma = 4.0;
    double theta = 0.62;
    double beta = 0.82;

    // Discounting is tied to the return so that delta*R = 1.
    static double delta(double R) { return 1.0 / R; }

    void validate() const {
        require(eps_net_of_tax >= 0, "range", "eps_net_of_tax must be >= 0");
        require(eps_link >= 0, "range", "eps_link must be >= 0");
        require(eps_benefit >= 0, "range", "eps_benefit must be >= 0");
        require(mpc >= 0 && mpc <= 1.5, "range", "mpc must lie in [0,1.5]");
        require(gamma > 0, "range", "gamma must be positive");
        require(theta > 0 && theta <= 1, "range", "theta must lie in (0,1]");
        require(beta > 0 && beta <= 1, "range", "beta must lie in (0,1]");
    }
};

inline double marginal_utility(double c, double gamma) {
    if (gamma == 4.0) {
        double q = 1.0 / (c * c);
        return q * q;
    }
    return std::pow(c, -gamma);
}

inline double utility(double c, double gamma) {
    if (gamma == 1.0) return std::log(c);
    return std::pow(c, 1.0 - gamma) / (1.0 - gamma);
}

struct Benefit {
    double self_funded = 0;
    double lump_sum = 0;
    double total = 0;
};

inline Benefit linear_benefit(double z, const PolicyParams& p, std::optional<double> z_bar) {
    require(p.variant == Variant::Linear, "variant", "linear_benefit needs the linear variant");
    require(z_bar.has_value(), "missing", "linear_benefit needs the mean earnings z_bar");
    Benefit b;
    b.self_funded = (1.0 - p.phi) * p.kappa * z * p.R;
    b.lump_sum = p.phi * p.kappa * (*z_bar) * p.R + p.E_bar;
    b.total = b.self_funded + b.lump_sum;
    return b;
}

inline double chile_subsidy(double self_funded, const PolicyParams& p) {
    require(p.variant == Variant::Chile, "variant", "chile_subsidy needs the chile variant");
    require(p.PMAS != 0.0, "range", "PMAS must be non-zero");
    return std::max(0.0, p.PBS * (1.0 - self_funded / p.PMAS));
}

enum class EulerMode { Exact, Approx };

inline double euler_distance(double c1, double c2, const BehavioralParams& b, double R, EulerMode mode) {
    require(c1 > 0 && c2 > 0, "consumption", "euler_distance needs positive consumption");
    double u1 = marginal_utility(c1, b.gamma);
    if (mode == EulerMode::Exact)
        return u1 - b.theta * marginal_utility(c2, b.gamma) * R * BehavioralParams::delta(R);
    return u1 * ((1.0 - b.theta) + b.theta * b.gamma * (c2 - c1) / c2);
}

struct ConsumptionStats {
    std::vector<double> u1;
    double c_bar = 0;
};

// c_bar is the certainty-equivalent level with u'(c_bar) = mean u'(c1).
inline ConsumptionStats consumption_statistics(const std::vector<double>& c1, double gamma) {
    require(!c1.empty(), "empty", "consumption_statistics needs a non-empty population");
    ConsumptionStats s;
    s.u1.resize(c1.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        require(c1[i] > 0, "consumption", "c1 must be positive");
        s.u1[i] = marginal_utility(c1[i], gamma);
    }
    s.c_bar = std::pow(mean(s.u1), -1.0 / gamma);
    return s;
}

enum class Reform { Kappa, Phi };

inline const char* to_string(Reform r) { return r == Reform::Kappa ? "kappa" : "phi"; }

// Semi-elasticity (dz/dparam)/z from the response lemma. `benefit_base` is the
// retirement-weighted mean earnings that funds the lump sum (z_bar when
// unweighted); b is the statutory lump sum it implies.
inline double earnings_semi_elasticity(const PolicyParams& p, const BehavioralParams& e, double benefit_base,
                                       Reform reform) {
    double n = p.net_of_tax();
    double m = p.link();
    double b = p.phi * p.kappa * p.R * benefit_base + p.E_bar;
    require(n > 0, "range", "net-of-tax rate must be positive");
    bool use_m = e.eps_link != 0.0, use_b = e.eps_benefit != 0.0;
    if (use_m) require(m > 0, "singular", "link m = 0 with a non-zero link elasticity");
    if (use_b) require(b != 0.0, "singular", "lump sum b = 0 with a non-zero benefit elasticity");
    double dm = reform == Reform::Kappa ? 1.0 - p.phi : -p.kappa;
    double db = reform == Reform::Kappa ? p.phi * benefit_base * p.R : p.kappa * benefit_base * p.R;
    double out = reform == Reform::Kappa ? -e.eps_net_of_tax / n : 0.0;
    if (use_m) out += e.eps_link * dm / m;
    if (use_b) out -= e.eps_benefit * db / b;
    return out;
}

// dz/dparam for a worker with earnings z.
inline double earnings_response(const PolicyParams& p, const BehavioralParams& e, double z_bar, Reform reform,
                                double z) {
    return z * earnings_semi_elasticity(p, e, z_bar, reform);
}

struct Thresholds {
    double a_lower = 0;
    double a_upper = 0;
};

// Savings bounds at t0 for "never recipient" (a_upper) and "always recipient"
// (a_lower). Series are indexed from t0; contributions land at month end.
inline Thresholds subsidy_thresholds(double PMAS, double annuity_price, const std::vector<double>& monthly_returns,
                                     const std::vector<double>& contribution_cap, int t0, int T) {
    require(t0 < T, "range", "subsidy_thresholds needs t0 < T");
    std::size_t len = static_cast<std::size_t>(T - t0);
    require(monthly_returns.size() >= len && contribution_cap.size() >= len, "coverage",
            "return and cap series must cover [t0, T)");
    double growth = 1.0;
    for (std::size_t t = 0; t < len; ++t) {
        require(1.0 + monthly_returns[t] > 0, "range", "gross return must be positive");
        growth *= 1.0 + monthly_returns[t];
    }
    // Future value at T of the largest feasible contributions.
    double fv = 0.0;
    for (std::size_t t = 0; t < len; ++t) fv = fv * (1.0 + monthly_returns[t]) + 0.1 * contribution_cap[t];
    Thresholds th;
    th.a_upper = PMAS * annuity_price / growth;
    th.a_lower = (PMAS - fv) * annuity_price / growth;
    return th;
}

}  // namespace pension
