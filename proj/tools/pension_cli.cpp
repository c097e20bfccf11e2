#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pension/pension.hpp>

namespace fs = std::filesystem;
using namespace pension;
using io::json;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "csv";
    std::optional<unsigned> threads;
    std::string design;
    std::string population_file, panel_file;
    std::string from, to;
    std::string param = "gamma";
    std::string grid;
    std::optional<int> replicates;
};

// Everything a subcommand needs, loaded once.
struct Run {
    std::string command;
    Options opt;
    ScenarioConfig cfg;
    io::Manifest manifest;

    Run(std::string cmd, const Options& o) : command(std::move(cmd)), opt(o) {
        auto c = Config::load(opt.config);
        cfg = ScenarioConfig::from_config(c, opt.seed);
        if (opt.threads) cfg.threads = *opt.threads;
        set_threads(cfg.threads);
        manifest = {command, cfg.seed, cfg.config_hash};
        fs::create_directories(opt.out_dir);
    }

    std::string path(const std::string& name) const { return (fs::path(opt.out_dir) / name).string(); }
    bool json_out() const { return opt.format == "json"; }

    void write(const std::string& name, const std::string& content) const {
        io::write_file(path(name), content);
        std::cout << path(name) << "\n";
    }

    std::vector<WorkerRecord> population() const {
        return opt.population_file.empty() ? generate_population(cfg) : io::read_population(opt.population_file);
    }

    GradientOptions gradient_options() const {
        return {cfg.welfare.bias_mu_power, cfg.welfare.retired_numeraire};
    }

    MomentOptions moment_options() const { return {cfg.welfare.euler_mode}; }

    Box box() const {
        return {cfg.optimizer.kappa_lo, cfg.optimizer.kappa_hi, cfg.optimizer.phi_lo, cfg.optimizer.phi_hi};
    }

    SolverOptions solver() const {
        SolverOptions s;
        s.tol = cfg.optimizer.tol;
        s.starts = cfg.optimizer.starts;
        return s;
    }
};

// Group retirement lengths: fitted on simulated deaths when there are any,
// otherwise read straight off the configured mortality curves.
LifeTable life_table_for(const Run& r, const std::vector<WorkerRecord>& pop) {
    bool simulated = !pop.empty() && pop.front().death_age_months.has_value();
    if (simulated) return econ::life_table(econ::mortality_life_expectancy(econ::death_records(pop, r.cfg), 2));
    const auto& m = r.cfg.mortality;
    return {econ::life_expectancy(econ::MortalityFit{m.below_intercept, m.below_slope}, 65),
            econ::life_expectancy(econ::MortalityFit{m.above_intercept, m.above_slope}, 65)};
}

WelfareSample welfare_sample(const Run& r, const std::vector<WorkerRecord>& pop) {
    WelfareSample s = WelfareSample::from_population(pop);
    if (r.cfg.welfare.survival_weighting) s.omega = survival_weights(s.z, s.id, life_table_for(r, pop));
    return s;
}

std::pair<int, int> panel_range(const Run& r) {
    auto [lo, hi] = econ::design_window(econ::DesignKind::Tax, r.cfg);
    if (!r.opt.from.empty()) lo = parse_month(r.opt.from);
    if (!r.opt.to.empty()) hi = parse_month(r.opt.to);
    return {lo, hi};
}

Panel panel_for(const Run& r, const std::vector<WorkerRecord>& pop, econ::DesignKind d) {
    if (!r.opt.panel_file.empty()) return io::read_panel(r.opt.panel_file);
    auto [lo, hi] = econ::design_window(d, r.cfg);
    return simulate_panel(pop, r.cfg, r.cfg.behavioral, lo, hi);
}

std::string key_value_csv(const json& j, const io::Manifest& m) {
    std::string out = m.comment() + "key,value\n";
    for (auto it = j.begin(); it != j.end(); ++it) out += it.key() + "," + it.value().dump() + "\n";
    return out;
}

int cmd_gen(const Run& r) {
    auto pop = r.population();
    if (r.json_out()) {
        json rows = json::array();
        for (const auto& w : pop) {
            json x{{"id", w.id},          {"gender", to_string(w.gender)}, {"dob_month", format_month(w.dob_month)},
                   {"z", w.z},            {"c1", w.c1},                    {"c2", w.c2},
                   {"s_pre", w.s_pre},    {"pfa", w.pfa},                  {"recipient", w.recipient}};
            x["death_age_months"] = w.death_age_months ? json(*w.death_age_months) : json(nullptr);
            rows.push_back(x);
        }
        r.write("population.json", io::dump({{"workers", rows}}, r.manifest));
    } else {
        r.write("population.csv", io::population_csv(pop, r.manifest));
    }
    return 0;
}

int cmd_panel(const Run& r) {
    auto pop = r.population();
    auto [lo, hi] = panel_range(r);
    Panel p = simulate_panel(pop, r.cfg, r.cfg.behavioral, lo, hi);
    if (r.json_out()) {
        json rows = json::array();
        for (const auto& x : p.rows)
            rows.push_back({{"worker_id", x.worker_id},
                            {"period", format_month(x.period)},
                            {"taxable_earnings", x.taxable_earnings},
                            {"employed", x.employed},
                            {"net_of_tax_rate", x.net_of_tax_rate},
                            {"consumption", x.consumption ? json(*x.consumption) : json(nullptr)}});
        r.write("panel.json", io::dump({{"rows", rows}}, r.manifest));
    } else {
        r.write("panel.csv", io::panel_csv(p, r.manifest));
    }
    return 0;
}

void write_table(const Run& r, const std::string& stem, const econ::EstimateTable& t, json& j, const std::string& key) {
    if (!r.json_out()) r.write(stem + ".csv", io::estimate_csv(t, r.manifest, key));
    j[key] = io::to_json(t);
}

void write_event(const Run& r, const std::string& stem, const econ::EventPath& e, json& j, const std::string& key) {
    if (!r.json_out()) r.write(stem + ".csv", io::event_csv(e, r.manifest));
    j[key] = io::to_json(e);
}

int cmd_estimate(const Run& r) {
    using econ::DesignKind;
    DesignKind d = econ::parse_design(r.opt.design);
    auto pop = r.population();
    const std::string stem = std::string("estimate_") + econ::to_string(d);
    json j;
    j["design"] = econ::to_string(d);
    switch (d) {
        case DesignKind::Tax: {
            auto res = econ::design_net_of_tax(pop, panel_for(r, pop, d), r.cfg);
            write_table(r, stem, res.did, j, "did");
            write_event(r, stem + "_event", res.dynamics, j, "dynamics");
            break;
        }
        case DesignKind::Benefit: {
            Panel p = panel_for(r, pop, d);
            auto res = econ::design_benefit_elasticity(pop, p, r.cfg);
            auto placebo = econ::design_benefit_elasticity(pop, p, r.cfg, true);
            write_table(r, stem + "_first_stage", res.first_stage, j, "first_stage");
            write_table(r, stem, res.second_stage, j, "second_stage");
            if (res.reduced_form) write_table(r, stem + "_reduced_form", *res.reduced_form, j, "reduced_form");
            if (placebo.reduced_form) write_table(r, stem + "_placebo", *placebo.reduced_form, j, "placebo_reduced_form");
            break;
        }
        case DesignKind::Mpc: {
            auto res = econ::design_mpc(pop, panel_for(r, pop, d), r.cfg);
            write_table(r, stem + "_first_stage", res.first_stage, j, "first_stage");
            write_table(r, stem, res.second_stage, j, "second_stage");
            break;
        }
        case DesignKind::Link: {
            auto res = econ::design_link_elasticity(pop, panel_for(r, pop, d), r.cfg);
            write_table(r, stem + "_first_stage", res.first_stage, j, "first_stage");
            write_table(r, stem + "_second_stage", res.second_stage, j, "second_stage");
            write_table(r, stem, res.disentangled, j, "disentangled");
            write_event(r, stem + "_event", res.dynamics, j, "dynamics");
            j["implicit_tax"] = res.implicit_tax;
            j["link_elasticity"] = {{"estimate", res.link_elasticity}, {"se", res.link_elasticity_se}};
            j["group_sizes"] = {{"always", res.always}, {"never", res.never}};
            break;
        }
        case DesignKind::Consumption: {
            auto survey = econ::simulate_survey(pop, r.cfg);
            auto res = econ::consumption_event_study(survey, pop);
            json groups = json::array();
            for (const auto& g : res.groups) {
                json x{{"group", g.group}};
                x["raw"] = io::to_json(g.raw);
                x["detrended"] = io::to_json(g.detrended);
                x["income_controlled"] = io::to_json(g.income_controlled);
                groups.push_back(x);
                if (!r.json_out()) {
                    r.write(stem + "_" + g.group + "_raw.csv", io::event_csv(g.raw, r.manifest));
                    r.write(stem + "_" + g.group + "_detrended.csv", io::event_csv(g.detrended, r.manifest));
                    r.write(stem + "_" + g.group + "_income_controlled.csv",
                            io::event_csv(g.income_controlled, r.manifest));
                }
            }
            j["groups"] = groups;
            json bins = json::array();
            std::string csv = r.manifest.comment() + "bin,z_mean,drop_mean,n\n";
            for (std::size_t k = 0; k < res.bins.size(); ++k) {
                const auto& b = res.bins[k];
                bins.push_back({{"z_mean", b.z_mean}, {"drop_mean", b.drop_mean}, {"n", b.n}});
                csv += std::to_string(k) + "," + io::num(b.z_mean) + "," + io::num(b.drop_mean) + "," + std::to_string(b.n) + "\n";
            }
            j["drop_bins"] = bins;
            j["drop_quadratic"] = res.quadratic;
            if (!r.json_out()) r.write(stem + "_drop_bins.csv", csv);
            break;
        }
        case DesignKind::Mortality: {
            auto m = econ::mortality_life_expectancy(econ::death_records(pop, r.cfg), 2);
            std::string csv = r.manifest.comment() + "group,intercept,slope,ages_used,deaths,life_expectancy\n";
            json groups = json::array();
            const char* names[2] = {"below", "above"};
            for (const auto& g : m.groups) {
                csv += std::string(names[g.group]) + "," + io::num(g.fit.intercept) + "," + io::num(g.fit.slope) + "," +
                       std::to_string(g.fit.ages_used) + "," + std::to_string(g.fit.deaths) + "," +
                       io::num(g.life_expectancy) + "\n";
                groups.push_back({{"group", names[g.group]},
                                  {"intercept", g.fit.intercept},
                                  {"slope", g.fit.slope},
                                  {"life_expectancy", g.life_expectancy}});
            }
            if (!r.json_out()) r.write(stem + ".csv", csv);
            j["groups"] = groups;
            j["retirement_gap"] = m.retirement_gap;
            break;
        }
    }
    if (r.json_out()) r.write(stem + ".json", io::dump(j, r.manifest));
    return 0;
}

int cmd_moments(const Run& r) {
    auto pop = r.population();
    auto s = welfare_sample(r, pop);
    MomentSet M = compute_moments(s, r.cfg.behavioral, r.cfg.policy, r.moment_options());
    json j = io::to_json(M);
    r.write(r.json_out() ? "moments.json" : "moments.csv",
            r.json_out() ? io::dump({{"moments", j}}, r.manifest) : key_value_csv(j, r.manifest));
    return 0;
}

json gradients(const Run& r, const WelfareSample& s, MomentSet& M) {
    M = compute_moments(s, r.cfg.behavioral, r.cfg.policy, r.moment_options());
    json out = json::array();
    for (Reform rf : {Reform::Kappa, Reform::Phi}) {
        auto g = gradient(r.cfg.policy, r.cfg.behavioral, M, rf, r.gradient_options());
        json x = io::to_json(g);
        if (rf == Reform::Phi) x["bias_share"] = bias_share(g);
        out.push_back(x);
    }
    return out;
}

int cmd_gradient(const Run& r) {
    auto pop = r.population();
    MomentSet M;
    json g = gradients(r, welfare_sample(r, pop), M);
    if (r.json_out()) {
        r.write("gradient.json", io::dump({{"gradients", g}}, r.manifest));
    } else {
        std::string csv = r.manifest.comment() +
                          "reform,social_insurance,inter_worker,fiscal_externality,bias_correction,total,"
                          "money_metric_total,mechanical_transfer,gain_per_dollar\n";
        for (const auto& x : g) {
            csv += x["reform"].get<std::string>();
            for (const char* k : {"social_insurance", "inter_worker", "fiscal_externality", "bias_correction", "total",
                                  "money_metric_total", "mechanical_transfer", "gain_per_dollar"})
                csv += "," + io::num(x[k].get<double>());
            csv += "\n";
        }
        r.write("gradient.csv", csv);
    }
    return 0;
}

OptimalDesign optimum(const Run& r, const WelfareSample& s) {
    WelfareModel model(s, r.cfg.policy, r.cfg.behavioral, r.cfg.welfare.frisch);
    DesignProblem dp(model, r.gradient_options());
    return dp.solve(r.box(), r.solver());
}

int cmd_optimize(const Run& r) {
    auto pop = r.population();
    auto s = welfare_sample(r, pop);
    OptimalDesign d = optimum(r, s);
    json j = io::to_json(d);
    j["status_quo_progressivity"] = progressivity_share(r.cfg.policy, s);
    r.write("optimal_design.json", io::dump({{"optimal_design", j}}, r.manifest));
    return 0;
}

int cmd_bootstrap(const Run& r) {
    auto pop = r.population();
    auto s = welfare_sample(r, pop);
    OptimalDesign full = optimum(r, s);
    const Box box = r.box();
    // Replicates start at the full-sample optimum with its Jacobian frozen.
    WelfareModel full_model(s, r.cfg.policy, r.cfg.behavioral, r.cfg.welfare.frisch);
    DesignProblem full_dp(full_model, r.gradient_options());
    const Eigen::Matrix2d J = foc_jacobian(full_dp.foc_map(), box, full.kappa_star, full.phi_star);
    const SolverOptions sopt = r.solver();
    Pipeline pipe = [&](const WelfareSample& rs) {
        WelfareModel model(rs, r.cfg.policy, r.cfg.behavioral, r.cfg.welfare.frisch);
        DesignProblem dp(model, r.gradient_options());
        return warm_solve(dp.foc_map(), box, sopt, Vec2{full.kappa_star, full.phi_star}, J);
    };
    int B = r.opt.replicates.value_or(r.cfg.bootstrap_replicates);
    BootstrapResult res = pairs_bootstrap(s, pipe, B, r.cfg.seed, r.cfg.threads);
    std::string csv = r.manifest.comment() + "replicate,kappa_star,phi_star,converged\n";
    json reps = json::array();
    for (std::size_t i = 0; i < res.replicates.size(); ++i) {
        const auto& x = res.replicates[i];
        csv += std::to_string(i) + "," + (x ? io::num(x->kappa_star) : "") + "," + (x ? io::num(x->phi_star) : "") + "," +
               (x ? "1" : "0") + "\n";
        reps.push_back(x ? json{{"kappa_star", x->kappa_star}, {"phi_star", x->phi_star}} : json(nullptr));
    }
    json hull = json::array();
    for (const auto& p : res.hull) hull.push_back({p[0], p[1]});
    json j{{"point", {{"kappa_star", full.kappa_star}, {"phi_star", full.phi_star}}},
           {"replicates_requested", B},
           {"failures", res.failures},
           {"kappa_interval", {res.kappa.lo, res.kappa.hi}},
           {"phi_interval", {res.phi.lo, res.phi.hi}},
           {"region_hull", hull}};
    if (r.json_out()) j["replicates"] = reps;
    else r.write("bootstrap_replicates.csv", csv);
    r.write("bootstrap.json", io::dump({{"bootstrap", j}}, r.manifest));
    return 0;
}

std::vector<double> parse_grid(const std::string& g) {
    std::vector<double> out;
    if (g.find(':') != std::string::npos) {
        auto f = io::split(g, ':');
        require(f.size() == 3, "usage", "grid 'lo:hi:n' needs three fields");
        double lo = io::to_double(f[0]), hi = io::to_double(f[1]);
        int n = std::stoi(f[2]);
        require(n >= 2, "usage", "grid needs at least two points");
        for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
        return out;
    }
    for (const auto& x : io::split(g, ',')) out.push_back(io::to_double(x));
    return out;
}

std::vector<double> default_grid(SweepParam p) {
    switch (p) {
        case SweepParam::Gamma: return parse_grid("1:8:15");
        case SweepParam::Theta: return parse_grid("0.5:1:11");
        case SweepParam::Beta: return parse_grid("0.5:1:11");
    }
    return {};
}

int cmd_sweep(const Run& r) {
    SweepParam p;
    if (r.opt.param == "gamma") p = SweepParam::Gamma;
    else if (r.opt.param == "theta") p = SweepParam::Theta;
    else if (r.opt.param == "beta") p = SweepParam::Beta;
    else throw Error("usage", "unknown sweep parameter '" + r.opt.param + "' (gamma|theta|beta)");
    auto grid = r.opt.grid.empty() ? default_grid(p) : parse_grid(r.opt.grid);
    auto pop = r.population();
    auto pts = comparative_statics(welfare_sample(r, pop), r.cfg.policy, r.cfg.behavioral, p, grid,
                                   r.gradient_options(), r.moment_options());
    const std::string stem = std::string("sweep_") + to_string(p);
    if (r.json_out()) {
        json rows = json::array();
        for (const auto& x : pts) {
            json row{{"value", x.value}, {"gain_kappa", x.gain_kappa}, {"gain_phi", x.gain_phi}};
            if (p == SweepParam::Theta) row["rational_drop"] = x.rational_drop;
            rows.push_back(row);
        }
        r.write(stem + ".json", io::dump({{"param", to_string(p)}, {"points", rows}}, r.manifest));
    } else {
        std::string csv = r.manifest.comment() + "param,value,gain_kappa,gain_phi" +
                          (p == SweepParam::Theta ? ",rational_drop" : "") + "\n";
        for (const auto& x : pts) {
            csv += std::string(to_string(p)) + "," + io::num(x.value) + "," + io::num(x.gain_kappa) + "," +
                   io::num(x.gain_phi);
            if (p == SweepParam::Theta) csv += "," + io::num(x.rational_drop);
            csv += "\n";
        }
        r.write(stem + ".csv", csv);
    }
    return 0;
}

int cmd_lifeexp(const Run& r) {
    auto pop = r.population();
    const auto& m = r.cfg.mortality;
    econ::MortalityFit below{m.below_intercept, m.below_slope}, above{m.above_intercept, m.above_slope};
    double le_b = econ::life_expectancy(below, 65), le_a = econ::life_expectancy(above, 65);
    json j{{"configured", {{"below", le_b}, {"above", le_a}, {"retirement_gap", le_a / le_b - 1.0}}}};
    if (!pop.empty() && pop.front().death_age_months) {
        auto fit = econ::mortality_life_expectancy(econ::death_records(pop, r.cfg), 2);
        j["fitted"] = {{"below", fit.groups[0].life_expectancy},
                       {"above", fit.groups[1].life_expectancy},
                       {"retirement_gap", fit.retirement_gap}};
    }
    // phi-reform gain with and without survival weighting
    WelfareSample s = WelfareSample::from_population(pop);
    LifeTable lt = life_table_for(r, pop);
    auto b = r.cfg.behavioral;
    auto p = r.cfg.policy;
    MomentSet M0 = compute_moments(s, b, p, r.moment_options());
    MomentSet M1 = le_weighted_moments(s, b, p, lt, r.moment_options());
    j["gain_phi"] = {{"unweighted", gradient(p, b, M0, Reform::Phi, r.gradient_options()).gain_per_dollar},
                     {"survival_weighted", gradient(p, b, M1, Reform::Phi, r.gradient_options()).gain_per_dollar}};
    if (r.json_out()) {
        r.write("lifeexp.json", io::dump({{"life_expectancy", j}}, r.manifest));
    } else {
        std::string csv = r.manifest.comment() + "source,below,above,retirement_gap\n";
        for (const char* k : {"configured", "fitted"})
            if (j.contains(k))
                csv += std::string(k) + "," + io::num(j[k]["below"].get<double>()) + "," +
                       io::num(j[k]["above"].get<double>()) + "," + io::num(j[k]["retirement_gap"].get<double>()) + "\n";
        r.write("lifeexp.csv", csv);
    }
    return 0;
}

int cmd_report(const Run& r) {
    auto pop = r.population();
    auto s = welfare_sample(r, pop);
    MomentSet M;
    json j;
    j["gradients"] = gradients(r, s, M);
    j["moments"] = io::to_json(M);
    json shares = json::array();
    for (double beta : {0.74, 0.82, 0.90}) {
        auto b = r.cfg.behavioral;
        b.beta = beta;
        shares.push_back({{"beta", beta}, {"bias_share", bias_share(gradient(r.cfg.policy, b, M, Reform::Phi, r.gradient_options()))}});
    }
    j["bias_share_phi"] = shares;
    OptimalDesign d = optimum(r, s);
    j["optimal_design"] = io::to_json(d);
    j["progressivity"] = {{"status_quo", progressivity_share(r.cfg.policy, s)}, {"optimum", d.progressivity_share}};
    r.write("report.json", io::dump(j, r.manifest));
    return 0;
}

int cmd_validate(const std::string& path) {
    auto diags = validate_config(path);
    for (const auto& d : diags)
        std::cout << d.severity << "," << d.key << "," << (d.line ? std::to_string(d.line) : "") << "," << d.message << "\n";
    std::string first;
    int errors = 0;
    for (const auto& d : diags)
        if (d.severity == "error" && errors++ == 0) first = (d.key.empty() ? "" : d.key + ": ") + d.message;
    if (errors) throw Error("config", std::to_string(errors) + " error(s); first: " + first);
    return 0;
}

std::string config_key_help() {
    std::ostringstream o;
    o << "Config keys (flat 'key = value' file, '#' comments):\n";
    for (const auto& k : config_schema()) {
        o << "  " << k.key << (k.required ? "" : " (optional)") << ": " << k.help;
        if (!k.choices.empty()) o << " [" << k.choices << "]";
        if (!k.fallback.empty()) o << " default " << k.fallback;
        o << "\n";
    }
    return o.str();
}

void write_error(const std::string& out_dir, const std::string& command, const Error& e, const Options& opt) {
    json j{{"error", {{"code", e.code()}, {"message", e.what()}, {"command", command}}},
           {"config", opt.config}};
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    try {
        fs::create_directories(out_dir);
        io::write_file((fs::path(out_dir) / "error.json").string(), j.dump(2) + "\n");
    } catch (...) {
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pension design microsimulation: synthetic data, identification designs and optimal policy"};
    app.footer(config_key_help() +
               "\nEnvironment:\n  PENSION_OUT_DIR  default for --out (otherwise the current directory)\n");
    app.require_subcommand(1);

    Options opt;
    const char* env_out = std::getenv("PENSION_OUT_DIR");
    opt.out_dir = env_out ? env_out : ".";

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", opt.seed, "seed; overrides the config");
        sub->add_option("--out", opt.out_dir, "output directory (env PENSION_OUT_DIR)");
        sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--threads", opt.threads, "worker threads, 0 = hardware count");
        sub->add_option("--population", opt.population_file, "read the population from this CSV instead of generating it")
            ->check(CLI::ExistingFile);
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic population");
    auto* panel = app.add_subcommand("panel", "simulate a monthly earnings/consumption panel");
    auto* estimate = app.add_subcommand("estimate", "run one identification design");
    auto* moments = app.add_subcommand("moments", "welfare moments at the status quo");
    auto* grad = app.add_subcommand("gradient", "welfare gradients and money-metric gains of both reforms");
    auto* optimize = app.add_subcommand("optimize", "solve for the optimal contribution rate and progressivity");
    auto* boot = app.add_subcommand("bootstrap", "pairs bootstrap of the optimal design");
    auto* sweep = app.add_subcommand("sweep", "comparative statics of the gains in one preference parameter");
    auto* lifeexp = app.add_subcommand("lifeexp", "life expectancy by earnings group and the weighted phi gain");
    auto* report = app.add_subcommand("report", "moments, gradients, optimum and progressivity in one file");
    auto* validate = app.add_subcommand("validate", "check a configuration file");

    for (auto* s : {gen, panel, estimate, moments, grad, optimize, boot, sweep, lifeexp, report}) common(s);
    panel->add_option("--from", opt.from, "first month YYYY-MM (default: start of the fee-change window)");
    panel->add_option("--to", opt.to, "last month YYYY-MM (default: end of the fee-change window)");
    estimate->add_option("--design", opt.design, "identification design")
        ->required()
        ->check(CLI::IsMember({"benefit", "mpc", "link", "tax", "consumption", "mortality"}));
    estimate->add_option("--panel", opt.panel_file, "read the panel from this CSV instead of simulating it")
        ->check(CLI::ExistingFile);
    boot->add_option("--replicates", opt.replicates, "number of replicates (default bootstrap.replicates)");
    sweep->add_option("--param", opt.param, "parameter to sweep")->check(CLI::IsMember({"gamma", "theta", "beta"}));
    sweep->add_option("--grid", opt.grid, "grid as 'a,b,c' or 'lo:hi:n'");
    validate->add_option("--config", opt.config, "configuration file")->required();
    validate->add_option("--out", opt.out_dir, "directory for error.json (env PENSION_OUT_DIR)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    try {
        if (command == "validate") return cmd_validate(opt.config);
        Run r(command, opt);
        if (command == "gen") return cmd_gen(r);
        if (command == "panel") return cmd_panel(r);
        if (command == "estimate") return cmd_estimate(r);
        if (command == "moments") return cmd_moments(r);
        if (command == "gradient") return cmd_gradient(r);
        if (command == "optimize") return cmd_optimize(r);
        if (command == "bootstrap") return cmd_bootstrap(r);
        if (command == "sweep") return cmd_sweep(r);
        if (command == "lifeexp") return cmd_lifeexp(r);
        if (command == "report") return cmd_report(r);
    } catch (const Error& e) {
        write_error(opt.out_dir, command, e, opt);
        return e.code() == "config" || e.code() == "seed" ? 2 : 1;
    } catch (const std::exception& e) {
        write_error(opt.out_dir, command, Error("internal", e.what()), opt);
        return 1;
    }
    return 1;
}
