#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "../common.hpp"
#include "../popgen.hpp"
#include "../rng.hpp"
#include "regression.hpp"

namespace pension::econ {

enum class DesignKind { Benefit, Mpc, Link, Tax, Consumption, Mortality };

inline const char* to_string(DesignKind d) {
    switch (d) {
        case DesignKind::Benefit: return "benefit";
        case DesignKind::Mpc: return "mpc";
        case DesignKind::Link: return "link";
        case DesignKind::Tax: return "tax";
        case DesignKind::Consumption: return "consumption";
        case DesignKind::Mortality: return "mortality";
    }
    return "?";
}

inline DesignKind parse_design(const std::string& s) {
    for (auto d : {DesignKind::Benefit, DesignKind::Mpc, DesignKind::Link, DesignKind::Tax, DesignKind::Consumption,
                   DesignKind::Mortality})
        if (s == to_string(d)) return d;
    throw Error("config", "unknown design '" + s + "'");
}

// Calendar months of panel data each design reads, inclusive.
inline std::pair<int, int> design_window(DesignKind d, const ScenarioConfig& cfg) {
    switch (d) {
        case DesignKind::Benefit: return {cfg.returns.crisis_start - 12, cfg.returns.crisis_end + 12};
        case DesignKind::Mpc: return {cfg.returns.crisis_start + 132, cfg.returns.crisis_start + 143};
        case DesignKind::Link: return {cfg.subsidy_intro - 12, cfg.subsidy_intro + 11};
        case DesignKind::Tax: return {cfg.fee_change_month - 24, cfg.fee_change_month + 23};
        default: return {0, -1};
    }
}

inline std::unordered_map<std::int64_t, std::size_t> index_by_id(const std::vector<WorkerRecord>& pop) {
    std::unordered_map<std::int64_t, std::size_t> m;
    m.reserve(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) m[pop[i].id] = i;
    return m;
}

inline double gender_dob_cluster(const WorkerRecord& w) { return 2.0 * w.dob_month + (w.gender == Gender::F ? 1 : 0); }

// Savings after the window, compounding month by month with the default
// glide-path shares. Divide by the annuity price when `normalize` is set.
inline std::vector<double> gfc_instrument(const std::vector<WorkerRecord>& pop, const FundReturns& fr, int start,
                                          int end, const ScenarioConfig& cfg, bool normalize = false,
                                          int age_shift_months = 0) {
    require(end >= start, "range", "empty crisis window");
    std::vector<double> rho(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& w = pop[i];
        require(std::isfinite(w.s_pre) && w.s_pre >= 0, "missing", "missing pre-crisis savings for worker " + std::to_string(w.id));
        double r = w.s_pre;
        int last = std::min(end, retirement_month(w, cfg) - 1);
        for (int t = start; t <= last; ++t)
            r *= fr.mix(glide_path_shares(t - w.dob_month + age_shift_months, w.gender, cfg.retire_F, cfg.retire_M), t);
        rho[i] = normalize ? r / cfg.annuity_price : r;
    }
    return rho;
}

struct WorkerWindowMeans {
    std::vector<double> pre_sum, post_sum, cons_sum;
    std::vector<int> pre_n, post_n, cons_n;
};

// Per-worker means of log earnings before `cut` and from `cut` on, within [lo, hi].
inline WorkerWindowMeans window_means(const Panel& panel, const std::unordered_map<std::int64_t, std::size_t>& idx,
                                      std::size_t n, int lo, int pre_end, int post_start, int hi) {
    WorkerWindowMeans m;
    m.pre_sum.assign(n, 0.0);
    m.post_sum.assign(n, 0.0);
    m.cons_sum.assign(n, 0.0);
    m.pre_n.assign(n, 0);
    m.post_n.assign(n, 0);
    m.cons_n.assign(n, 0);
    for (const auto& r : panel.rows) {
        if (r.period < lo || r.period > hi) continue;
        auto it = idx.find(r.worker_id);
        if (it == idx.end()) continue;
        std::size_t i = it->second;
        if (r.consumption) {
            m.cons_sum[i] += *r.consumption;
            ++m.cons_n[i];
        }
        if (!r.employed || r.taxable_earnings <= 0) continue;
        double ly = std::log(r.taxable_earnings);
        if (r.period <= pre_end) {
            m.pre_sum[i] += ly;
            ++m.pre_n[i];
        } else if (r.period >= post_start) {
            m.post_sum[i] += ly;
            ++m.post_n[i];
        }
    }
    return m;
}

struct IvResult {
    EstimateTable first_stage;
    EstimateTable second_stage;
    std::optional<EstimateTable> reduced_form;
};

namespace detail {

inline int age_years_at(const WorkerRecord& w, int month) { return (month - w.dob_month) / 12; }

inline bool in_glide_transition(const WorkerRecord& w, int age_years, const ScenarioConfig& cfg) {
    int ry = cfg.retire_age(w.gender) / 12;
    return (age_years >= 35 && age_years <= 40) || (age_years >= ry - 11 && age_years <= ry - 5);
}

}  // namespace detail

// Benefit design: change in log earnings around the crisis on the log future
// pension, instrumented by log crisis-window savings. Controls: age-year FE,
// gender, log pre-crisis savings and the log pension expected before the
// crisis. Clustered by gender x birth month.
inline IvResult design_benefit_elasticity(const std::vector<WorkerRecord>& pop, const Panel& panel,
                                          const ScenarioConfig& cfg, bool placebo = false) {
    const auto& fr = cfg.returns;
    auto idx = index_by_id(pop);
    int lo = fr.crisis_start - 12, hi = fr.crisis_end + 12;
    auto means = window_means(panel, idx, pop.size(), lo, fr.crisis_start - 1, fr.crisis_end + 1, hi);
    // The placebo instrument pretends the worker is ten years older.
    auto rho = gfc_instrument(pop, fr, fr.crisis_start, fr.crisis_end, cfg, true, placebo ? 120 : 0);
    const bool narrow = cfg.design.benefit_sample == "narrow";
    std::vector<double> dy, lp, lr, lp0, ls, fem, age, cl;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& w = pop[i];
        if (w.s_pre <= 0 || retirement_month(w, cfg) <= hi) continue;
        // Subsidy recipients face a concurrent earnings shift from the 2008 reform.
        if (w.recipient) continue;
        if (means.pre_n[i] == 0 || means.post_n[i] == 0) continue;
        int a = detail::age_years_at(w, fr.crisis_start);
        if (placebo) {
            if (a < 25 || a > 33) continue;
        } else {
            if (a < 25) continue;
            if (narrow && !detail::in_glide_transition(w, a, cfg)) continue;
        }
        PensionPath pp = pension_path(w, cfg);
        dy.push_back(means.post_sum[i] / means.post_n[i] - means.pre_sum[i] / means.pre_n[i]);
        lp.push_back(std::log(pp.pension));
        lr.push_back(std::log(rho[i]));
        lp0.push_back(std::log(pp.pension0));
        ls.push_back(std::log(w.s_pre));
        fem.push_back(w.gender == Gender::F ? 1.0 : 0.0);
        age.push_back(a);
        cl.push_back(gender_dob_cluster(w));
    }
    require(dy.size() > 10, "empty", "benefit design sample is empty");
    Frame f;
    f.add("d_log_earnings", dy);
    f.add("log_pension", lp);
    f.add("log_rho", lr);
    f.add("log_pension_expected", lp0);
    f.add("log_s_pre", ls);
    f.add("female", fem);
    f.add("age_year", age);
    f.add("gender_dob", cl);
    RegressionSpec fs{"log_pension", {"log_rho", "female", "log_s_pre", "log_pension_expected"}, {}, {}, {"age_year"},
                      std::string("gender_dob"), "exposed workers"};
    RegressionSpec ss{"d_log_earnings", {"female", "log_s_pre", "log_pension_expected"}, {"log_pension"}, {"log_rho"},
                      {"age_year"}, std::string("gender_dob"), "exposed workers"};
    RegressionSpec rf{"d_log_earnings", {"log_rho", "female", "log_s_pre", "log_pension_expected"}, {}, {}, {"age_year"},
                      std::string("gender_dob"), "exposed workers"};
    IvResult out;
    out.first_stage = ols_fe(f, fs);
    out.reduced_form = ols_fe(f, rf);
    if (!placebo) out.second_stage = tsls(f, ss);
    return out;
}

// MPC design: retired consumption on the shortfall of the pension from the
// one expected before the crisis, instrumented by crisis-window savings, for
// workers who were in the C-to-D migration when the crisis hit. All money
// amounts are per unit of lifetime earnings, which keeps the instrument
// independent of the earnings level; the coefficient is the MPC in levels.
// Glide shares are constant between birthdays, so age effects would absorb
// nearly all exposure variation and are left out.
inline IvResult design_mpc(const std::vector<WorkerRecord>& pop, const Panel& panel, const ScenarioConfig& cfg) {
    const auto& fr = cfg.returns;
    auto idx = index_by_id(pop);
    auto [lo, hi] = design_window(DesignKind::Mpc, cfg);
    auto means = window_means(panel, idx, pop.size(), lo, lo - 1, hi + 1, hi);
    auto rho = gfc_instrument(pop, fr, fr.crisis_start, fr.crisis_end, cfg, true);
    std::vector<double> c, gap, r, s, fem, cl;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const auto& w = pop[i];
        int a = detail::age_years_at(w, fr.crisis_start);
        int ry = cfg.retire_age(w.gender) / 12;
        if (a < ry - 11 || a > ry - 5) continue;
        if (retirement_month(w, cfg) > lo || means.cons_n[i] == 0 || w.z <= 0) continue;
        PensionPath pp = pension_path(w, cfg);
        c.push_back(means.cons_sum[i] / means.cons_n[i] / w.z);
        gap.push_back((pp.pension - pp.pension0) / w.z);
        r.push_back(rho[i] / w.z);
        s.push_back(w.s_pre / w.z);
        fem.push_back(w.gender == Gender::F ? 1.0 : 0.0);
        cl.push_back(gender_dob_cluster(w));
    }
    require(c.size() > 10, "empty", "mpc design sample is empty");
    Frame f;
    f.add("consumption", c);
    f.add("pension_gap", gap);
    f.add("rho", r);
    f.add("s_pre", s);
    f.add("female", fem);
    f.add("gender_dob", cl);
    RegressionSpec fs{"pension_gap", {"rho", "female", "s_pre"}, {}, {}, {}, std::string("gender_dob"), "retired migrants"};
    RegressionSpec ss{"consumption", {"female", "s_pre"}, {"pension_gap"}, {"rho"}, {}, std::string("gender_dob"),
                      "retired migrants"};
    IvResult out;
    out.first_stage = ols_fe(f, fs);
    out.second_stage = tsls(f, ss);
    return out;
}

struct LinkResult {
    EstimateTable first_stage;
    EstimateTable second_stage;
    EstimateTable disentangled;
    double implicit_tax = 0;            // PBS/PMAS of the design economy
    double link_elasticity = 0;         // disentangled post x recipient / log(1 - phi')
    double link_elasticity_se = 0;
    std::size_t always = 0, never = 0;  // workers per group
    EventPath dynamics;                 // reduced form by quarter, omitted quarter -1
};

// Link design around the subsidy introduction. Workers retiring 13 to 42
// months after the introduction are placed by savings relative to their own
// thresholds: "always" below the lower one, "never" above the upper one, each
// within a band of `bandwidth` times the upper threshold. The planted effect
// of becoming a recipient on log earnings is
//   eps_link*log(1 - phi') - eps_benefit*log(1 + subsidy share),
// so the disentangled coefficient on post x recipient divided by
// log(1 - phi') recovers eps_link.
inline LinkResult design_link_elasticity(const std::vector<WorkerRecord>& pop, const Panel& panel,
                                         const ScenarioConfig& cfg) {
    const int t0 = cfg.subsidy_intro;
    const double bw = cfg.design.bandwidth, scale = cfg.design.pmas_scale;
    struct Info {
        double always = 0, recipient = 0, share = 0;
    };
    std::unordered_map<std::int64_t, Info> sample;
    std::vector<double> fr, fa, fc;
    LinkResult out;
    for (const auto& w : pop) {
        int ret = retirement_month(w, cfg);
        if (ret <= t0 + 12 || ret > t0 + 42) continue;
        Thresholds th = worker_thresholds(w, cfg, scale);
        double a = savings_at_intro(w, cfg);
        bool always = a < th.a_lower && a >= th.a_lower - bw * th.a_upper;
        bool never = a > th.a_upper && a <= th.a_upper * (1.0 + bw);
        if (!always && !never) continue;
        PensionPath pp = pension_path(w, cfg);
        Info inf{always ? 1.0 : 0.0, w.recipient ? 1.0 : 0.0, std::log1p(pp.subsidy_share)};
        sample[w.id] = inf;
        fr.push_back(inf.recipient);
        fa.push_back(inf.always);
        fc.push_back(w.dob_month);
        (always ? out.always : out.never)++;
    }
    require(out.always > 0 && out.never > 0, "empty", "link design has an empty treated or control cell");
    {
        Frame f;
        f.add("recipient", fr);
        f.add("below_lower", fa);
        f.add("dob", fc);
        out.first_stage = ols_fe(f, {"recipient", {"below_lower"}, {}, {}, {}, std::string("dob"), "threshold bands"});
    }
    // Placebo thresholds only carry a first stage: the subsidy share is zero
    // on both sides, so the second stages are not identified.
    if (scale != 1.0) {
        out.link_elasticity = out.link_elasticity_se = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    auto idx = index_by_id(pop);
    std::vector<double> y, wid, mon, post_r, post_a, post_rs, post_as, dob, evq;
    for (const auto& r : panel.rows) {
        if (r.period < t0 - 12 || r.period > t0 + 11 || !r.employed || r.taxable_earnings <= 0) continue;
        auto it = sample.find(r.worker_id);
        if (it == sample.end()) continue;
        const auto& inf = it->second;
        double post = r.period >= t0 ? 1.0 : 0.0;
        y.push_back(std::log(r.taxable_earnings));
        wid.push_back(static_cast<double>(r.worker_id));
        mon.push_back(r.period);
        post_r.push_back(post * inf.recipient);
        post_a.push_back(post * inf.always);
        post_rs.push_back(post * inf.recipient * inf.share);
        post_as.push_back(post * inf.always * inf.share);
        dob.push_back(pop[idx.at(r.worker_id)].dob_month);
        int q = (r.period - t0) >= 0 ? (r.period - t0) / 3 : -((t0 - r.period + 2) / 3);
        evq.push_back(inf.always > 0 ? q : std::nan(""));
    }
    Frame f;
    f.add("log_earnings", y);
    f.add("worker", wid);
    f.add("month", mon);
    f.add("post_recipient", post_r);
    f.add("post_below_lower", post_a);
    f.add("post_recipient_share", post_rs);
    f.add("post_below_lower_share", post_as);
    f.add("dob", dob);
    f.add("event_quarter", evq);
    out.second_stage = tsls(f, {"log_earnings", {}, {"post_recipient"}, {"post_below_lower"}, {"worker", "month"},
                                std::string("dob"), "threshold bands"});
    out.disentangled = tsls(f, {"log_earnings", {}, {"post_recipient", "post_recipient_share"},
                                {"post_below_lower", "post_below_lower_share"}, {"worker", "month"},
                                std::string("dob"), "threshold bands"});
    out.implicit_tax = cfg.design.pbs / cfg.design.pmas;
    double l = std::log(1.0 - out.implicit_tax);
    out.link_elasticity = out.disentangled.at("post_recipient").estimate / l;
    out.link_elasticity_se = out.disentangled.at("post_recipient").se / std::abs(l);
    out.dynamics = event_study(f, {"log_earnings", {}, {}, {}, {"worker", "month"}, std::string("dob"), "threshold bands"},
                               "event_quarter", -4, 3, -1);
    return out;
}

struct TaxResult {
    EstimateTable did;
    EventPath dynamics;  // quarters relative to the fee change, omitted quarter -1
};

// Fee-change design: log earnings on the log net-of-tax rate with worker and
// month effects over a symmetric 48-month window, clustered by worker. The
// only net-of-tax variation is the treated administrator's fee cut, so the
// coefficient is the DiD estimate of the elasticity of taxable income.
inline TaxResult design_net_of_tax(const std::vector<WorkerRecord>& pop, const Panel& panel, const ScenarioConfig& cfg) {
    require(cfg.fee_cut > 0, "design", "no fee change in the window");
    auto [lo, hi] = design_window(DesignKind::Tax, cfg);
    auto idx = index_by_id(pop);
    std::vector<double> y, ntr, wid, mon, pfa, evq;
    for (const auto& r : panel.rows) {
        if (r.period < lo || r.period > hi || !r.employed || r.taxable_earnings <= 0) continue;
        auto it = idx.find(r.worker_id);
        if (it == idx.end()) continue;
        const auto& w = pop[it->second];
        // Workers must be active through the whole window.
        if (retirement_month(w, cfg) <= hi) continue;
        y.push_back(std::log(r.taxable_earnings));
        ntr.push_back(std::log(r.net_of_tax_rate));
        wid.push_back(static_cast<double>(r.worker_id));
        mon.push_back(r.period);
        pfa.push_back(w.pfa);
        int d = r.period - cfg.fee_change_month;
        int q = d >= 0 ? d / 3 : -((-d + 2) / 3);
        evq.push_back(w.pfa == cfg.fee_treated ? q : std::nan(""));
    }
    require(!y.empty(), "empty", "tax design sample is empty");
    Frame f;
    f.add("log_earnings", y);
    f.add("log_net_of_tax", ntr);
    f.add("worker", wid);
    f.add("month", mon);
    f.add("pfa", pfa);
    f.add("event_quarter", evq);
    TaxResult out;
    out.did = ols_fe(f, {"log_earnings", {"log_net_of_tax"}, {}, {}, {"worker", "month"}, std::string("worker"),
                         "active through the window"});
    out.dynamics = event_study(
        f, {"log_earnings", {}, {}, {}, {"worker", "month"}, std::string("worker"), "active through the window"},
        "event_quarter", -8, 7, -1);
    return out;
}

// Yearly consumption survey around retirement.
struct SurveyRow {
    std::int64_t worker_id = 0;
    int year = 0;
    int event_time = 0;  // years since the retirement year
    double log_consumption = 0;
    double log_income = 0;
};

// Consumption falls by the worker's drop at retirement; income falls by
// drop/income_share, so controlling for income absorbs the drop.
inline std::vector<SurveyRow> simulate_survey(const std::vector<WorkerRecord>& pop, const ScenarioConfig& cfg,
                                              double noise_sd = 0.05) {
    const int years = cfg.design.survey_years;
    const int first = -(years / 2);
    const double share = cfg.design.survey_income_share;
    require(share > 0, "range", "survey income share must be positive");
    std::vector<double> year_fx(400);
    Stream yr(cfg.seed, 0, Purpose::Design);
    for (auto& v : year_fx) v = 0.02 * yr.normal();
    std::vector<std::vector<SurveyRow>> per(pop.size());
    parallel_for(
        pop.size(),
        [&](std::size_t i) {
            const auto& w = pop[i];
            Stream st(cfg.seed, static_cast<std::uint64_t>(w.id), Purpose::Survey);
            int ry = month_year(retirement_month(w, cfg));
            double drop = std::log(w.c1) - std::log(w.c2);
            for (int k = first; k < first + years; ++k) {
                SurveyRow r;
                r.worker_id = w.id;
                r.year = ry + k;
                r.event_time = k;
                double post = k >= 0 ? 1.0 : 0.0;
                double fx = year_fx[static_cast<std::size_t>(std::clamp(r.year - 1800, 0, 399))];
                r.log_consumption = std::log(w.c1) - post * drop + fx + noise_sd * st.normal();
                r.log_income = std::log(w.z) - post * drop / share + fx + noise_sd * st.normal();
                per[i].push_back(r);
            }
        },
        cfg.threads);
    std::vector<SurveyRow> out;
    for (auto& v : per) out.insert(out.end(), v.begin(), v.end());
    return out;
}

struct GroupPath {
    std::string group;
    EventPath raw, detrended, income_controlled;
};

struct DropBin {
    double z_mean = 0, drop_mean = 0;
    std::size_t n = 0;
};

struct ConsumptionResult {
    std::vector<GroupPath> groups;  // "below" then "above" the cohort-gender mean of z
    std::vector<DropBin> bins;
    std::array<double, 3> quadratic{0, 0, 0};  // drop = q0 + q1 z + q2 z^2 over bin means
};

inline int three_year_bin(int event_time) { return event_time >= 0 ? event_time / 3 : -((-event_time + 2) / 3); }

// Event study of log consumption in 3-year bins with year effects, bin [-3,-1]
// omitted, separately for workers below and above their cohort-gender mean z.
inline ConsumptionResult consumption_event_study(const std::vector<SurveyRow>& survey,
                                                 const std::vector<WorkerRecord>& pop, int n_bins = 52) {
    require(!survey.empty(), "empty", "empty survey");
    auto idx = index_by_id(pop);
    // Group by cohort (birth year) and gender.
    std::unordered_map<long, std::pair<double, int>> cell;
    auto key = [](const WorkerRecord& w) { return static_cast<long>(month_year(w.dob_month)) * 2 + (w.gender == Gender::F); };
    for (const auto& w : pop) {
        auto& c = cell[key(w)];
        c.first += w.z;
        c.second += 1;
    }
    auto below = [&](const WorkerRecord& w) {
        const auto& c = cell.at(key(w));
        return w.z < c.first / c.second;
    };
    ConsumptionResult out;
    for (int g = 0; g < 2; ++g) {
        std::vector<double> y, inc, year, bin, wid, et;
        for (const auto& r : survey) {
            auto it = idx.find(r.worker_id);
            if (it == idx.end()) continue;
            if (below(pop[it->second]) != (g == 0)) continue;
            y.push_back(r.log_consumption);
            inc.push_back(r.log_income);
            year.push_back(r.year);
            bin.push_back(three_year_bin(r.event_time));
            wid.push_back(static_cast<double>(r.worker_id));
            et.push_back(r.event_time);
        }
        require(!y.empty(), "empty", "empty consumption group");
        int lo = static_cast<int>(*std::min_element(bin.begin(), bin.end()));
        int hi = static_cast<int>(*std::max_element(bin.begin(), bin.end()));
        Frame f;
        f.add("log_consumption", y);
        f.add("log_income", inc);
        f.add("year", year);
        f.add("bin", bin);
        f.add("worker", wid);
        GroupPath gp;
        gp.group = g == 0 ? "below" : "above";
        RegressionSpec s{"log_consumption", {}, {}, {}, {"year"}, std::string("worker"), gp.group};
        gp.raw = event_study(f, s, "bin", lo, hi, -1);
        // Detrended: remove a linear event-time trend fitted on pre-retirement rows.
        {
            double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
            for (std::size_t i = 0; i < y.size(); ++i)
                if (et[i] < 0) {
                    sx += et[i];
                    sy += y[i];
                    sxx += et[i] * et[i];
                    sxy += et[i] * y[i];
                    n += 1;
                }
            double slope = n > 1 && (n * sxx - sx * sx) != 0 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
            std::vector<double> yd(y.size());
            for (std::size_t i = 0; i < y.size(); ++i) yd[i] = y[i] - slope * et[i];
            Frame fd = f;
            fd.add("log_consumption", yd);
            gp.detrended = event_study(fd, s, "bin", lo, hi, -1);
        }
        RegressionSpec si = s;
        si.regressors = {"log_income"};
        gp.income_controlled = event_study(f, si, "bin", lo, hi, -1);
        out.groups.push_back(std::move(gp));
    }
    // Binned drop curve: per-worker mean post minus mean pre log consumption.
    std::unordered_map<std::int64_t, std::array<double, 4>> acc;
    for (const auto& r : survey) {
        auto& a = acc[r.worker_id];
        if (r.event_time < 0) {
            a[0] += r.log_consumption;
            a[1] += 1;
        } else {
            a[2] += r.log_consumption;
            a[3] += 1;
        }
    }
    std::vector<std::pair<double, double>> zd;
    std::vector<std::int64_t> ids;
    for (const auto& [id, a] : acc) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    for (auto id : ids) {
        const auto& a = acc[id];
        if (a[1] == 0 || a[3] == 0) continue;
        auto it = idx.find(id);
        if (it == idx.end()) continue;
        zd.push_back({pop[it->second].z, a[0] / a[1] - a[2] / a[3]});
    }
    std::sort(zd.begin(), zd.end());
    require(zd.size() >= static_cast<std::size_t>(n_bins), "empty", "too few workers for the binned drop curve");
    for (int b = 0; b < n_bins; ++b) {
        std::size_t s = zd.size() * b / n_bins, e = zd.size() * (b + 1) / n_bins;
        DropBin db;
        for (std::size_t i = s; i < e; ++i) {
            db.z_mean += zd[i].first;
            db.drop_mean += zd[i].second;
        }
        db.n = e - s;
        db.z_mean /= db.n;
        db.drop_mean /= db.n;
        out.bins.push_back(db);
    }
    Eigen::MatrixXd X(n_bins, 3);
    Eigen::VectorXd yv(n_bins);
    for (int b = 0; b < n_bins; ++b) {
        X(b, 0) = 1;
        X(b, 1) = out.bins[b].z_mean;
        X(b, 2) = out.bins[b].z_mean * out.bins[b].z_mean;
        yv[b] = out.bins[b].drop_mean;
    }
    Eigen::Vector3d q = X.colPivHouseholderQr().solve(yv);
    out.quadratic = {q[0], q[1], q[2]};
    return out;
}

}  // namespace pension::econ
