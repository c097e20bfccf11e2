#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "config.hpp"
#include "core.hpp"
#include "rng.hpp"

namespace pension {

enum class Gender { F, M };

inline const char* to_string(Gender g) { return g == Gender::F ? "F" : "M"; }

struct WorkerRecord {
    std::int64_t id = 0;
    Gender gender = Gender::F;
    int dob_month = 0;  // see make_month
    double z = 0;       // lifetime taxable earnings, annual scale
    double c1 = 0;
    double c2 = 0;
    double s_pre = 0;  // pension savings the month before the crisis window
    int pfa = 0;
    bool recipient = false;
    std::optional<int> death_age_months;
};

struct FundShares {
    double alpha_B = 1, alpha_C = 0, alpha_D = 0;
};

// Default fund allocation by age. Steps happen on birthdays only.
inline FundShares glide_path_shares(int age_months, Gender g, int retire_F = 720, int retire_M = 780) {
    int years = age_months / 12;
    int retire_years = (g == Gender::F ? retire_F : retire_M) / 12;
    int to_c = std::clamp(years - 35, 0, 5);                     // fifths moved B -> C
    int to_d = std::clamp(years - (retire_years - 10) + 1, 0, 5);  // fifths moved C -> D
    FundShares s;
    if (to_d > 0) {
        s.alpha_B = 0.0;
        s.alpha_C = (5 - to_d) / 5.0;
        s.alpha_D = to_d / 5.0;
    } else {
        s.alpha_B = (5 - to_c) / 5.0;
        s.alpha_C = to_c / 5.0;
        s.alpha_D = 0.0;
    }
    return s;
}

struct FundReturns {
    std::array<double, 3> normal{1.003, 1.003, 1.003};
    std::array<double, 3> crisis{1.0, 1.0, 1.0};
    int crisis_start = 0, crisis_end = -1;

    bool in_crisis(int month) const { return month >= crisis_start && month <= crisis_end; }
    double gross(int fund, int month) const { return in_crisis(month) ? crisis[fund] : normal[fund]; }
    double mix(const FundShares& s, int month) const {
        return s.alpha_B * gross(0, month) + s.alpha_C * gross(1, month) + s.alpha_D * gross(2, month);
    }
};

struct ConsumptionLink {
    double c1_intercept = 0, c1_slope = 0, c1_noise_sd = 0;
    double drop_intercept = 0, drop_slope = 0, drop_noise_sd = 0;
};

struct PanelParams {
    double fe_sd = 0.1, noise_sd = 0.1;
    double age_linear = 0.0, age_quadratic = 0.0;
    double employment_rate = 1.0;
    double confounding = 0.0;
};

// Parameters of the quasi-experimental environment. Pension amounts here are
// annual flows; savings are converted with the annuity price.
struct DesignParams {
    double bandwidth = 0.1;
    double pmas_scale = 1.0;
    double recipient_always = 0.63;
    double recipient_never = 0.05;
    double pmas = 0.3;
    double pbs = 0.1;
    double earnings_cap = 0.1;  // monthly
    std::string benefit_sample = "wide";
    int survey_years = 18;
    double survey_income_share = 0.5;
};

struct MortalityParams {
    double below_intercept = -1.746, below_slope = 0.027;
    double above_intercept = -1.258, above_slope = 0.019;
    bool simulate = true;
};

struct WelfareOptions {
    bool survival_weighting = false;
    double frisch = 0.5;
    EulerMode euler_mode = EulerMode::Exact;
    int bias_mu_power = 1;
    bool retired_numeraire = false;
};

struct OptimizerOptions {
    double tol = 1e-8;
    int starts = 5;
    double kappa_lo = 0.02, kappa_hi = 0.6, phi_lo = 0.02, phi_hi = 0.98;
};

struct ScenarioConfig {
    std::size_t n_workers = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    double log_mean = 0.0, log_sd = 0.5;
    ConsumptionLink link;
    BehavioralParams behavioral;
    PolicyParams policy;
    int retire_F = 720, retire_M = 780;
    int dob_start = make_month(1948, 1), dob_end = make_month(1975, 12);
    FundReturns returns;
    int pfa_count = 5;
    double fee_base = 0.0236;
    int fee_treated = 0;
    int fee_change_month = make_month(2010, 8);
    double fee_cut = 0.0189;
    double pass_through = 1.0;
    int subsidy_intro = make_month(2008, 7);
    double annuity_price = 15.0;
    PanelParams panel;
    DesignParams design;
    MortalityParams mortality;
    WelfareOptions welfare;
    OptimizerOptions optimizer;
    int bootstrap_replicates = 200;
    std::string config_hash = "0000000000000000";

    int retire_age(Gender g) const { return g == Gender::F ? retire_F : retire_M; }

    double fee(int pfa, int month) const {
        return fee_base - ((pfa == fee_treated && month >= fee_change_month) ? fee_cut : 0.0);
    }

    double net_of_tax(int pfa, int month) const {
        return 1.0 - policy.tau - policy.kappa - pass_through * fee(pfa, month);
    }

    void validate() const {
        require(n_workers > 0, "config", "n_workers must be positive");
        require(log_sd >= 0, "config", "earnings_law.log_sd must be >= 0");
        require(returns.crisis_end >= returns.crisis_start, "config", "crisis window is empty");
        require(fee_base >= 0 && fee_base < 1 && fee_base - fee_cut >= 0, "config", "fee rates must lie in [0,1)");
        policy.validate();
        behavioral.validate();
    }

    // Seed precedence: explicit override, then the config, otherwise an error.
    static ScenarioConfig from_config(const Config& c, std::optional<std::uint64_t> seed_override = std::nullopt) {
        auto diags = c.validate();
        if (!diags.empty()) {
            std::string msg;
            for (const auto& d : diags) msg += d.key + ": " + d.message + (d.line ? " (line " + std::to_string(d.line) + ")" : "") + "; ";
            throw Error("config", msg);
        }
        ScenarioConfig s;
        if (seed_override)
            s.seed = *seed_override;
        else if (c.has("seed"))
            s.seed = c.unsigned_integer("seed");
        else
            throw Error("seed", "no seed given: pass --seed or set 'seed' in the config");
        s.threads = static_cast<unsigned>(c.integer("threads"));
        s.n_workers = static_cast<std::size_t>(c.integer("n_workers"));
        s.log_mean = c.real("earnings_law.log_mean");
        s.log_sd = c.real("earnings_law.log_sd");
        s.link = {c.real("consumption_link.c1_intercept"), c.real("consumption_link.c1_slope"),
                  c.real("consumption_link.c1_noise_sd"),  c.real("consumption_link.drop_intercept"),
                  c.real("consumption_link.drop_slope"),   c.real("consumption_link.drop_noise_sd")};
        auto& b = s.behavioral;
        b.eps_net_of_tax = c.real("behavioral.eps_net_of_tax");
        b.eps_link = c.real("behavioral.eps_link");
        b.eps_benefit = c.real("behavioral.eps_benefit");
        b.mpc = c.real("behavioral.mpc");
        b.gamma = c.real("behavioral.gamma");
        b.theta = c.real("behavioral.theta");
        b.beta = c.real("behavioral.beta");
        auto& p = s.policy;
        p.variant = c.text("policy.variant") == "chile" ? Variant::Chile : Variant::Linear;
        p.kappa = c.real("policy.kappa");
        p.phi = c.real("policy.phi");
        p.tau = c.real("policy.tau");
        p.R = c.real("policy.R");
        p.E_bar = c.real("policy.E_bar");
        p.PBS = c.real("policy.PBS");
        p.PMAS = c.real("policy.PMAS");
        s.retire_F = static_cast<int>(c.integer("retirement_age_months.F"));
        s.retire_M = static_cast<int>(c.integer("retirement_age_months.M"));
        s.dob_start = c.month("cohort.dob_start");
        s.dob_end = c.month("cohort.dob_end");
        s.returns.crisis_start = c.month("crisis_window.start");
        s.returns.crisis_end = c.month("crisis_window.end");
        const char* funds[3] = {"B", "C", "D"};
        for (int f = 0; f < 3; ++f) {
            s.returns.normal[f] = c.real(std::string("fund_returns.") + funds[f] + ".normal");
            s.returns.crisis[f] = c.real(std::string("fund_returns.") + funds[f] + ".crisis");
        }
        s.pfa_count = static_cast<int>(c.integer("pfa.count"));
        s.fee_base = c.real("pfa_fee.base");
        s.fee_treated = static_cast<int>(c.integer("pfa_fee.treated"));
        s.fee_change_month = c.month("pfa_fee.change_month");
        s.fee_cut = c.real("pfa_fee.cut");
        s.pass_through = c.real("pfa_fee.pass_through");
        s.subsidy_intro = c.month("subsidy_intro_month");
        s.annuity_price = c.real("annuity_price");
        s.panel = {c.real("panel.fe_sd"),         c.real("panel.noise_sd"),
                   c.real("panel.age_linear"),    c.real("panel.age_quadratic"),
                   c.real("panel.employment_rate"), c.real("panel.confounding")};
        auto& d = s.design;
        d.bandwidth = c.real("design.bandwidth");
        d.pmas_scale = c.real("design.pmas_scale");
        d.recipient_always = c.real("design.recipient_always");
        d.recipient_never = c.real("design.recipient_never");
        d.pmas = c.real("design.pmas");
        d.pbs = c.real("design.pbs");
        d.earnings_cap = c.real("design.earnings_cap");
        d.benefit_sample = c.text("design.benefit_sample");
        d.survey_years = static_cast<int>(c.integer("design.survey_years"));
        d.survey_income_share = c.real("design.survey_income_share");
        auto& m = s.mortality;
        m.below_intercept = c.real("mortality.below.intercept");
        m.below_slope = c.real("mortality.below.slope");
        m.above_intercept = c.real("mortality.above.intercept");
        m.above_slope = c.real("mortality.above.slope");
        m.simulate = c.flag("mortality.simulate");
        auto& w = s.welfare;
        w.survival_weighting = c.flag("welfare.survival_weighting");
        w.frisch = c.real("welfare.frisch");
        w.euler_mode = c.text("welfare.euler_mode") == "approx" ? EulerMode::Approx : EulerMode::Exact;
        w.bias_mu_power = static_cast<int>(c.integer("welfare.bias_mu_power"));
        w.retired_numeraire = c.text("welfare.numeraire") == "retired";
        auto& o = s.optimizer;
        o.tol = c.real("optimizer.tol");
        o.starts = static_cast<int>(c.integer("optimizer.starts"));
        o.kappa_lo = c.real("optimizer.kappa_lo");
        o.kappa_hi = c.real("optimizer.kappa_hi");
        o.phi_lo = c.real("optimizer.phi_lo");
        o.phi_hi = c.real("optimizer.phi_hi");
        s.bootstrap_replicates = static_cast<int>(c.integer("bootstrap.replicates"));
        s.config_hash = hex64(fnv1a(c.canonical()));
        s.validate();
        return s;
    }
};

inline int retirement_month(const WorkerRecord& w, const ScenarioConfig& cfg) {
    return w.dob_month + cfg.retire_age(w.gender);
}

inline FundShares shares_at(const WorkerRecord& w, const ScenarioConfig& cfg, int month) {
    return glide_path_shares(month - w.dob_month, w.gender, cfg.retire_F, cfg.retire_M);
}

// Savings position entering the subsidy-introduction month.
inline double savings_at_intro(const WorkerRecord& w, const ScenarioConfig& cfg) {
    double a = w.s_pre;
    for (int t = cfg.subsidy_intro; t < cfg.returns.crisis_start; ++t) a /= cfg.returns.mix(shares_at(w, cfg, t), t);
    return a;
}

// Thresholds for the link design at a given PMAS scale, in savings units.
inline Thresholds worker_thresholds(const WorkerRecord& w, const ScenarioConfig& cfg, double pmas_scale) {
    int t0 = cfg.subsidy_intro, T = std::max(retirement_month(w, cfg), t0 + 1);
    std::vector<double> r(T - t0), cap(T - t0);
    for (int t = t0; t < T; ++t) {
        // The crisis is unforeseen at the introduction date.
        r[t - t0] = cfg.returns.normal[1] - 1.0;
        cap[t - t0] = cfg.design.earnings_cap / cfg.annuity_price;
    }
    return subsidy_thresholds(cfg.design.pmas * pmas_scale, cfg.annuity_price, r, cap, t0, T);
}

inline double normalized_position(double a, const Thresholds& th) { return (a - th.a_lower) / (th.a_upper - th.a_lower); }

// Planted recipient propensity: flat outside the thresholds, linear between.
inline double recipient_probability(double m, const DesignParams& d) {
    if (m < 0) return d.recipient_always;
    if (m > 1) return d.recipient_never;
    return d.recipient_always + (d.recipient_never - d.recipient_always) * m;
}

inline double design_subsidy(double self_funded, const DesignParams& d) {
    return std::max(0.0, d.pbs * (1.0 - self_funded / d.pmas));
}

// Retirement pension of a worker with and without the crisis returns.
struct PensionPath {
    double rho = 0, rho0 = 0;              // savings after the crisis window, actual and counterfactual
    double self_funded = 0, self_funded0 = 0;
    double pension = 0, pension0 = 0;      // self-funded plus subsidy, annual
    double subsidy_share = 0;              // subsidy over self-funded pension, counterfactual
    bool exposed = false;                  // still saving when the crisis hit
};

inline PensionPath pension_path(const WorkerRecord& w, const ScenarioConfig& cfg) {
    PensionPath p;
    const auto& fr = cfg.returns;
    int ret = retirement_month(w, cfg);
    p.exposed = ret > fr.crisis_end;
    double rho = w.s_pre, rho0 = w.s_pre;
    int last = std::min(fr.crisis_end, ret - 1);
    for (int t = fr.crisis_start; t <= last; ++t) {
        FundShares s = shares_at(w, cfg, t);
        rho *= fr.mix(s, t);
        rho0 *= s.alpha_B * fr.normal[0] + s.alpha_C * fr.normal[1] + s.alpha_D * fr.normal[2];
    }
    p.rho = rho;
    p.rho0 = rho0;
    double monthly = cfg.policy.kappa * w.z / 12.0;
    double a = rho, a0 = rho0;
    for (int t = fr.crisis_end + 1; t < ret; ++t) {
        double g = fr.mix(shares_at(w, cfg, t), t);
        a = a * g + monthly;
        a0 = a0 * g + monthly;
    }
    p.self_funded = a / cfg.annuity_price;
    p.self_funded0 = a0 / cfg.annuity_price;
    p.pension = p.self_funded + design_subsidy(p.self_funded, cfg.design);
    p.pension0 = p.self_funded0 + design_subsidy(p.self_funded0, cfg.design);
    p.subsidy_share = design_subsidy(p.self_funded0, cfg.design) / p.self_funded0;
    return p;
}

inline double hazard_percent_log(double intercept, double slope, double age_years) { return intercept + slope * age_years; }

inline std::vector<WorkerRecord> generate_population(const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<WorkerRecord> pop(cfg.n_workers);
    const double median_z = std::exp(cfg.log_mean);
    const int dob_span = cfg.dob_end - cfg.dob_start + 1;
    parallel_for(
        cfg.n_workers,
        [&](std::size_t i) {
            WorkerRecord w;
            w.id = static_cast<std::int64_t>(i) + 1;
            const auto id = static_cast<std::uint64_t>(w.id);
            Stream demo(cfg.seed, id, Purpose::Demographics);
            w.gender = demo.uniform() < 0.5 ? Gender::F : Gender::M;
            w.dob_month = cfg.dob_start + static_cast<int>(demo.below(static_cast<std::uint64_t>(dob_span)));
            w.pfa = static_cast<int>(demo.below(static_cast<std::uint64_t>(cfg.pfa_count)));

            Stream earn(cfg.seed, id, Purpose::Earnings);
            double lz = cfg.log_mean + cfg.log_sd * earn.normal();
            w.z = std::exp(lz);

            Stream cons(cfg.seed, id, Purpose::Consumption);
            const auto& L = cfg.link;
            double lc1 = L.c1_intercept + L.c1_slope * lz + L.c1_noise_sd * cons.normal();
            Stream drop_s(cfg.seed, id, Purpose::Drop);
            double drop = L.drop_intercept + L.drop_slope * lz + L.drop_noise_sd * drop_s.normal();
            w.c1 = std::exp(lc1);
            w.c2 = std::exp(lc1 - drop);

            // Savings built up by the month before the crisis; career length in
            // completed years of age at the crisis start.
            Stream sav(cfg.seed, id, Purpose::Savings);
            double age_at_crisis = static_cast<double>((cfg.returns.crisis_start - w.dob_month) / 12);
            double career = std::clamp(age_at_crisis - 25.0, 0.0, (cfg.retire_age(w.gender) / 12) - 25.0);
            w.s_pre = cfg.policy.kappa * w.z * career * (0.8 + 0.4 * sav.uniform());

            Stream rec(cfg.seed, id, Purpose::Recipient);
            double m = normalized_position(savings_at_intro(w, cfg), worker_thresholds(w, cfg, 1.0));
            w.recipient = rec.uniform() < recipient_probability(m, cfg.design);

            if (cfg.mortality.simulate) {
                Stream mort(cfg.seed, id, Purpose::Mortality);
                bool below = w.z < median_z;
                double c = below ? cfg.mortality.below_intercept : cfg.mortality.above_intercept;
                double s = below ? cfg.mortality.below_slope : cfg.mortality.above_slope;
                int age = cfg.retire_age(w.gender) / 12;
                int death = 120 * 12;  // survivors are censored at 120
                for (; age < 120; ++age) {
                    double h = std::min(1.0, std::exp(hazard_percent_log(c, s, age)) / 100.0);
                    if (mort.uniform() < h) {
                        death = age * 12 + static_cast<int>(mort.below(12));
                        break;
                    }
                }
                w.death_age_months = std::max(death, cfg.retire_age(w.gender));
            }
            require(std::isfinite(w.z) && std::isfinite(w.c1) && std::isfinite(w.c2) && std::isfinite(w.s_pre), "draw",
                    "non-finite draw for worker " + std::to_string(w.id));
            pop[i] = w;
        },
        cfg.threads);
    return pop;
}

struct PanelRow {
    std::int64_t worker_id = 0;
    int period = 0;
    double taxable_earnings = 0;
    bool employed = true;
    double net_of_tax_rate = 0;
    std::optional<double> consumption;
};

struct Panel {
    std::vector<PanelRow> rows;
};

struct PanelShocks {
    bool fee_change = true;
    bool subsidy = true;
    bool crisis = true;
    double noise_scale = 1.0;  // 0 gives the planted shifts exactly
};

// Monthly panel for the months [m0, m1]. Log earnings are
//   log(z/12) + fe + age profile + eps_nt*dlog(net-of-tax) + link response - eps_b*dlog(pension)
// plus noise. Retired months carry consumption and no earnings.
inline Panel simulate_panel(const std::vector<WorkerRecord>& pop, const ScenarioConfig& cfg, const BehavioralParams& behav,
                            int m0, int m1, const PanelShocks& shocks = {}) {
    require(m1 >= m0, "range", "empty month range");
    require(cfg.fee_base - cfg.fee_cut >= 0, "coverage", "fee path must be covered");
    const std::size_t months = static_cast<std::size_t>(m1 - m0 + 1);
    std::vector<std::vector<PanelRow>> per(pop.size());
    const double phi_prime = cfg.design.pbs / cfg.design.pmas;
    parallel_for(
        pop.size(),
        [&](std::size_t i) {
            const WorkerRecord& w = pop[i];
            Stream noise(cfg.seed, static_cast<std::uint64_t>(w.id), Purpose::PanelNoise);
            double fe = cfg.panel.fe_sd * noise.normal() * shocks.noise_scale;
            // Stress switch: treatment status shifts the earnings level.
            fe += cfg.panel.confounding * ((w.pfa == cfg.fee_treated ? 1.0 : 0.0) + (w.recipient ? 1.0 : 0.0));
            PensionPath pp = pension_path(w, cfg);
            int ret = retirement_month(w, cfg);
            double base_ntr = 1.0 - cfg.policy.tau - cfg.policy.kappa - cfg.pass_through * cfg.fee_base;
            auto& rows = per[i];
            rows.reserve(months);
            for (int t = m0; t <= m1; ++t) {
                PanelRow r;
                r.worker_id = w.id;
                r.period = t;
                double eps = noise.normal() * shocks.noise_scale;
                double emp_u = noise.uniform();
                double ntr = shocks.fee_change ? cfg.net_of_tax(w.pfa, t) : base_ntr;
                require(ntr > 0, "range", "negative net-of-tax rate");
                r.net_of_tax_rate = ntr;
                if (t >= ret) {
                    r.employed = false;
                    r.taxable_earnings = 0.0;
                    double shift = shocks.crisis ? behav.mpc * (pp.pension - pp.pension0) : 0.0;
                    r.consumption = w.c2 + shift + 0.02 * eps;
                    rows.push_back(r);
                    continue;
                }
                double age = (t - w.dob_month) / 12.0 - 45.0;
                double ly = std::log(w.z / 12.0) + fe + cfg.panel.age_linear * age + cfg.panel.age_quadratic * age * age;
                ly += behav.eps_net_of_tax * std::log(ntr / base_ntr);
                if (shocks.subsidy && w.recipient && t >= cfg.subsidy_intro)
                    ly += behav.eps_link * std::log(1.0 - phi_prime) - behav.eps_benefit * std::log(1.0 + pp.subsidy_share);
                if (shocks.crisis && pp.exposed && t > cfg.returns.crisis_end)
                    ly -= behav.eps_benefit * std::log(pp.pension / pp.pension0);
                ly += cfg.panel.noise_sd * eps;
                r.employed = emp_u < cfg.panel.employment_rate || shocks.noise_scale == 0.0;
                r.taxable_earnings = r.employed ? std::exp(ly) : 0.0;
                rows.push_back(r);
            }
        },
        cfg.threads);
    Panel out;
    std::size_t total = 0;
    for (const auto& v : per) total += v.size();
    out.rows.reserve(total);
    for (auto& v : per)
        for (auto& r : v) out.rows.push_back(r);
    return out;
}

}  // namespace pension
