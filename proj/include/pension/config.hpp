#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace pension {

enum class KeyType { Real, Integer, Month, Choice, Flag, Text };

struct KeySpec {
    std::string key;
    KeyType type;
    bool required;
    double lo, hi;        // inclusive numeric range for Real/Integer
    std::string choices;  // '|' separated for Choice
    std::string help;
    std::string fallback;  // used when an optional key is absent
};

inline constexpr double kInf = 1e300;

// The full set of recognised keys. Anything else in a file is an error.
inline const std::vector<KeySpec>& config_schema() {
    using K = KeyType;
    static const std::vector<KeySpec> s = {
        {"seed", K::Integer, false, 0, 1.8e19, "", "64-bit seed (the --seed flag wins)", ""},
        {"threads", K::Integer, false, 0, 1024, "", "worker threads, 0 = hardware count", "0"},
        {"n_workers", K::Integer, true, 1, 1e9, "", "population size", ""},
        {"earnings_law.log_mean", K::Real, true, -kInf, kInf, "", "mean of log z", ""},
        {"earnings_law.log_sd", K::Real, true, 0, 5, "", "sd of log z", ""},
        {"consumption_link.c1_intercept", K::Real, true, -kInf, kInf, "", "E[log c1] at log z = 0", ""},
        {"consumption_link.c1_slope", K::Real, true, -kInf, kInf, "", "slope of E[log c1] on log z", ""},
        {"consumption_link.c1_noise_sd", K::Real, true, 0, kInf, "", "noise sd of log c1", ""},
        {"consumption_link.drop_intercept", K::Real, true, -kInf, kInf, "", "E[log c1 - log c2] at log z = 0", ""},
        {"consumption_link.drop_slope", K::Real, true, -kInf, kInf, "", "slope of the drop on log z", ""},
        {"consumption_link.drop_noise_sd", K::Real, true, 0, kInf, "", "noise sd of the drop", ""},
        {"behavioral.eps_net_of_tax", K::Real, true, 0, kInf, "", "elasticity of z to the net-of-tax rate", ""},
        {"behavioral.eps_link", K::Real, true, 0, kInf, "", "elasticity of z to the benefit-earnings link", ""},
        {"behavioral.eps_benefit", K::Real, true, 0, kInf, "", "elasticity magnitude of z to the lump sum", ""},
        {"behavioral.mpc", K::Real, true, 0, 1.5, "", "retirement MPC", ""},
        {"behavioral.gamma", K::Real, true, 1e-9, kInf, "", "relative risk aversion", ""},
        {"behavioral.theta", K::Real, true, 1e-9, 1, "", "retirement state dependence", ""},
        {"behavioral.beta", K::Real, true, 1e-9, 1, "", "present-focus factor", ""},
        {"policy.variant", K::Choice, true, 0, 0, "linear|chile", "pension rule at the status quo", ""},
        {"policy.kappa", K::Real, true, 0, 1, "", "contribution rate", ""},
        {"policy.phi", K::Real, true, 0, 1, "", "benefit progressivity", ""},
        {"policy.tau", K::Real, true, 0, 0.999999, "", "linear income tax", ""},
        {"policy.R", K::Real, true, 1e-9, kInf, "", "gross return on pension savings", ""},
        {"policy.E_bar", K::Real, true, -kInf, kInf, "", "exogenous pension spending per capita", ""},
        {"policy.PBS", K::Real, false, 0, kInf, "", "minimum pension (chile only)", "0"},
        {"policy.PMAS", K::Real, false, 0, kInf, "", "largest subsidised pension (chile only)", "0"},
        {"retirement_age_months.F", K::Integer, true, 1, 1500, "", "female retirement age in months", ""},
        {"retirement_age_months.M", K::Integer, true, 1, 1500, "", "male retirement age in months", ""},
        {"cohort.dob_start", K::Month, true, 0, 0, "", "first birth month", ""},
        {"cohort.dob_end", K::Month, true, 0, 0, "", "last birth month", ""},
        {"crisis_window.start", K::Month, true, 0, 0, "", "first crisis month", ""},
        {"crisis_window.end", K::Month, true, 0, 0, "", "last crisis month", ""},
        {"fund_returns.B.normal", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund B", ""},
        {"fund_returns.B.crisis", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund B in the crisis", ""},
        {"fund_returns.C.normal", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund C", ""},
        {"fund_returns.C.crisis", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund C in the crisis", ""},
        {"fund_returns.D.normal", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund D", ""},
        {"fund_returns.D.crisis", K::Real, true, 1e-9, kInf, "", "gross monthly return of fund D in the crisis", ""},
        {"pfa.count", K::Integer, true, 2, 100, "", "number of administrators", ""},
        {"pfa_fee.base", K::Real, true, 0, 0.999999, "", "fee rate of every administrator", ""},
        {"pfa_fee.treated", K::Integer, true, 0, 99, "", "administrator that cuts its fee", ""},
        {"pfa_fee.change_month", K::Month, true, 0, 0, "", "month of the fee cut", ""},
        {"pfa_fee.cut", K::Real, true, 0, 0.999999, "", "size of the fee cut", ""},
        {"pfa_fee.pass_through", K::Real, true, 0, kInf, "", "net-of-tax points per fee point", ""},
        {"subsidy_intro_month", K::Month, true, 0, 0, "", "month the subsidy starts", ""},
        {"annuity_price", K::Real, true, 1e-9, kInf, "", "savings needed per unit of annual pension", ""},
        {"panel.fe_sd", K::Real, true, 0, kInf, "", "sd of the worker earnings effect", ""},
        {"panel.noise_sd", K::Real, true, 0, kInf, "", "sd of monthly log-earnings noise", ""},
        {"panel.age_linear", K::Real, true, -kInf, kInf, "", "log-earnings slope in age (years)", ""},
        {"panel.age_quadratic", K::Real, true, -kInf, kInf, "", "log-earnings curvature in age (years)", ""},
        {"panel.employment_rate", K::Real, true, 0, 1, "", "probability a worker-month is employed", ""},
        {"panel.confounding", K::Real, false, -kInf, kInf, "", "loading of treatment draws on the earnings effect", "0"},
        {"design.bandwidth", K::Real, false, 1e-9, 1, "", "threshold bandwidth of the link design", "0.1"},
        {"design.pmas_scale", K::Real, false, 1e-9, kInf, "", "PMAS scale used to classify (placebo when != 1)", "1"},
        {"design.recipient_always", K::Real, false, 0, 1, "", "recipient rate below the lower threshold", "0.63"},
        {"design.recipient_never", K::Real, false, 0, 1, "", "recipient rate above the upper threshold", "0.05"},
        {"design.pmas", K::Real, false, 1e-9, kInf, "", "largest subsidised annual pension in the design economy", "0.3"},
        {"design.pbs", K::Real, false, 0, kInf, "", "minimum annual pension in the design economy", "0.1"},
        {"design.earnings_cap", K::Real, false, 0, kInf, "", "monthly taxable earnings cap", "0.1"},
        {"design.benefit_sample", K::Choice, false, 0, 0, "wide|narrow", "cohorts used by the benefit design", "wide"},
        {"design.survey_years", K::Integer, false, 3, 60, "", "years per worker in the consumption survey", "18"},
        {"design.survey_income_share", K::Real, false, 0, 1, "", "pass-through of income drops to consumption", "0.5"},
        {"mortality.below.intercept", K::Real, true, -kInf, kInf, "", "log hazard (percent) intercept, below median", ""},
        {"mortality.below.slope", K::Real, true, -kInf, kInf, "", "log hazard (percent) slope in age, below median", ""},
        {"mortality.above.intercept", K::Real, true, -kInf, kInf, "", "log hazard (percent) intercept, above median", ""},
        {"mortality.above.slope", K::Real, true, -kInf, kInf, "", "log hazard (percent) slope in age, above median", ""},
        {"mortality.simulate", K::Flag, false, 0, 0, "", "draw death ages", "true"},
        {"welfare.survival_weighting", K::Flag, false, 0, 0, "", "weight retirement flows by life expectancy", "false"},
        {"welfare.frisch", K::Real, false, 1e-6, kInf, "", "curvature of the earnings disutility", "0.5"},
        {"welfare.euler_mode", K::Choice, false, 0, 0, "exact|approx", "distance to the Euler equation", "exact"},
        {"welfare.bias_mu_power", K::Integer, false, 1, 2, "", "power of mu in the bias term", "1"},
        {"welfare.numeraire", K::Choice, false, 0, 0, "active|retired", "money-metric numeraire", "active"},
        {"optimizer.tol", K::Real, false, 1e-15, 1, "", "FOC residual tolerance", "1e-8"},
        {"optimizer.starts", K::Integer, false, 5, 1000, "", "multi-start count", "5"},
        {"optimizer.kappa_lo", K::Real, false, 0, 1, "", "search box", "0.02"},
        {"optimizer.kappa_hi", K::Real, false, 0, 1, "", "search box", "0.6"},
        {"optimizer.phi_lo", K::Real, false, 0, 1, "", "search box", "0.02"},
        {"optimizer.phi_hi", K::Real, false, 0, 1, "", "search box", "0.98"},
        {"bootstrap.replicates", K::Integer, false, 2, 100000, "", "pairs-bootstrap replicates", "200"},
    };
    return s;
}

inline const KeySpec* find_key(const std::string& key) {
    for (const auto& k : config_schema())
        if (k.key == key) return &k;
    return nullptr;
}

struct Diagnostic {
    std::string key;
    std::string message;
    std::string severity;  // "error" or "warning"
    int line = 0;
};

struct RawEntry {
    std::string value;
    int line = 0;
};

inline std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Flat dotted key = value text. '#' starts a comment.
class Config {
public:
    static Config parse(std::istream& in, std::vector<Diagnostic>* diags = nullptr) {
        Config c;
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) {
                c.push(diags, {"", "line is not 'key = value'", "error", no});
                continue;
            }
            std::string k = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
            if (c.raw_.count(k)) c.push(diags, {k, "duplicate key", "error", no});
            c.raw_[k] = {v, no};
        }
        return c;
    }

    static Config from_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("io", "cannot read config '" + path + "'");
        std::vector<Diagnostic> d;
        Config c = parse(in, &d);
        c.syntax_ = d;
        return c;
    }

    void set(const std::string& k, const std::string& v) { raw_[k] = {v, 0}; }
    bool has(const std::string& k) const { return raw_.count(k) > 0; }
    const std::map<std::string, RawEntry>& entries() const { return raw_; }

    std::vector<Diagnostic> validate() const {
        std::vector<Diagnostic> out = syntax_;
        for (const auto& [k, e] : raw_) {
            const KeySpec* spec = find_key(k);
            if (!spec) {
                out.push_back({k, "unknown key", "error", e.line});
                continue;
            }
            std::string msg = check_value(*spec, e.value);
            if (!msg.empty()) out.push_back({k, msg, "error", e.line});
        }
        for (const auto& spec : config_schema())
            if (spec.required && !raw_.count(spec.key)) out.push_back({spec.key, "missing required key", "error", 0});
        if (out.empty()) cross_checks(out);
        return out;
    }

    std::string text(const std::string& k) const {
        auto it = raw_.find(k);
        if (it != raw_.end()) return it->second.value;
        const KeySpec* spec = find_key(k);
        if (spec && !spec->required) return spec->fallback;
        throw Error("config", "missing key '" + k + "'");
    }
    double real(const std::string& k) const { return std::stod(text(k)); }
    long long integer(const std::string& k) const { return std::stoll(text(k)); }
    std::uint64_t unsigned_integer(const std::string& k) const { return std::stoull(text(k)); }
    int month(const std::string& k) const { return parse_month(text(k)); }
    bool flag(const std::string& k) const {
        std::string v = text(k);
        return v == "true" || v == "1" || v == "yes";
    }

    // Canonical text used for hashing: sorted keys, no comments or spacing.
    // The thread count is left out because results do not depend on it.
    std::string canonical() const {
        std::string s;
        for (const auto& [k, e] : raw_)
            if (k != "threads") s += k + "=" + e.value + "\n";
        return s;
    }

private:
    std::map<std::string, RawEntry> raw_;
    std::vector<Diagnostic> syntax_;

    void push(std::vector<Diagnostic>* d, Diagnostic x) {
        if (d) d->push_back(std::move(x));
    }

    static std::string check_value(const KeySpec& s, const std::string& v) {
        try {
            switch (s.type) {
                case KeyType::Real:
                case KeyType::Integer: {
                    std::size_t pos = 0;
                    double x = std::stod(v, &pos);
                    if (pos != v.size()) return "not a number: '" + v + "'";
                    if (s.type == KeyType::Integer && x != std::floor(x)) return "not an integer: '" + v + "'";
                    if (!std::isfinite(x)) return "not finite";
                    if (x < s.lo || x > s.hi) {
                        std::ostringstream o;
                        o << "value " << v << " outside [" << s.lo << ", " << s.hi << "]";
                        return o.str();
                    }
                    return "";
                }
                case KeyType::Month:
                    parse_month(v);
                    return "";
                case KeyType::Choice: {
                    std::string all = "|" + s.choices + "|";
                    if (all.find("|" + v + "|") == std::string::npos) return "expected one of " + s.choices;
                    return "";
                }
                case KeyType::Flag:
                    if (v == "true" || v == "false" || v == "1" || v == "0" || v == "yes" || v == "no") return "";
                    return "expected true or false";
                case KeyType::Text:
                    return "";
            }
        } catch (const std::exception&) {
            return "cannot parse '" + v + "'";
        }
        return "";
    }

    void cross_checks(std::vector<Diagnostic>& out) const {
        if (real("policy.kappa") + real("policy.tau") >= 1) out.push_back({"policy.tau", "kappa + tau must be below 1", "error", 0});
        if (text("policy.variant") == "chile") {
            if (!has("policy.PMAS") || real("policy.PMAS") <= 0)
                out.push_back({"policy.PMAS", "chile variant needs PMAS > 0", "error", 0});
            else if (real("policy.PBS") > real("policy.PMAS"))
                out.push_back({"policy.PBS", "PBS must not exceed PMAS", "error", 0});
        }
        if (month("cohort.dob_end") < month("cohort.dob_start"))
            out.push_back({"cohort.dob_end", "birth range is empty", "error", 0});
        if (month("crisis_window.end") < month("crisis_window.start"))
            out.push_back({"crisis_window.end", "crisis window is empty", "error", 0});
        if (integer("pfa_fee.treated") >= integer("pfa.count"))
            out.push_back({"pfa_fee.treated", "treated administrator out of range", "error", 0});
        if (real("pfa_fee.cut") > real("pfa_fee.base")) out.push_back({"pfa_fee.cut", "cut exceeds the base fee", "error", 0});
        if (real("optimizer.kappa_lo") >= real("optimizer.kappa_hi") || real("optimizer.phi_lo") >= real("optimizer.phi_hi"))
            out.push_back({"optimizer", "empty search box", "error", 0});
    }
};

inline std::vector<Diagnostic> validate_config(const std::string& path) { return Config::load(path).validate(); }

// FNV-1a, used to stamp outputs with the configuration they came from.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

}  // namespace pension
