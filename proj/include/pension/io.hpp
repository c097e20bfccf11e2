#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "econometrics/designs.hpp"
#include "econometrics/mortality.hpp"
#include "econometrics/regression.hpp"
#include "optimizer.hpp"
#include "popgen.hpp"
#include "welfare.hpp"

namespace pension::io {

using json = nlohmann::ordered_json;

// Provenance stamped on every artifact. No timestamps: outputs must be
// byte-identical across reruns.
struct Manifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string version = kVersion;

    std::string comment() const {
        return "# command=" + command + " seed=" + std::to_string(seed) + " config_hash=" + config_hash +
               " version=" + version + "\n";
    }

    json to_json() const {
        return json{{"command", command}, {"seed", seed}, {"config_hash", config_hash}, {"version", version}};
    }
};

inline std::string num(double x) {
    if (std::isnan(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot write '" + path + "'");
    out << content;
    if (!out) throw Error("io", "write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Data lines of a CSV after its comment lines and header; checks the header.
inline std::vector<std::vector<std::string>> read_csv(const std::string& path, const std::string& header) {
    std::istringstream in(read_file(path));
    std::string line;
    bool seen_header = false;
    std::vector<std::vector<std::string>> rows;
    std::size_t cols = split(header).size();
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            if (line != header) throw Error("parse", path + ": expected header '" + header + "'");
            seen_header = true;
            continue;
        }
        auto f = split(line);
        if (f.size() != cols) throw Error("parse", path + ":" + std::to_string(no) + ": wrong number of fields");
        rows.push_back(std::move(f));
    }
    if (!seen_header) throw Error("parse", path + ": missing header");
    return rows;
}

inline double to_double(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw Error("parse", "bad number '" + s + "'");
    return v;
}

inline const char* kPopulationHeader = "id,gender,dob_month,z,c1,c2,s_pre,pfa,recipient,death_age_months";
inline const char* kPanelHeader = "worker_id,period,taxable_earnings,employed,net_of_tax_rate,consumption";

inline std::string population_csv(const std::vector<WorkerRecord>& pop, const Manifest& m) {
    std::string out = m.comment() + kPopulationHeader + "\n";
    for (const auto& w : pop) {
        out += std::to_string(w.id) + "," + to_string(w.gender) + "," + format_month(w.dob_month) + "," + num(w.z) + "," +
               num(w.c1) + "," + num(w.c2) + "," + num(w.s_pre) + "," + std::to_string(w.pfa) + "," +
               (w.recipient ? "1" : "0") + "," + (w.death_age_months ? std::to_string(*w.death_age_months) : "") + "\n";
    }
    return out;
}

inline std::vector<WorkerRecord> read_population(const std::string& path) {
    std::vector<WorkerRecord> pop;
    for (const auto& f : read_csv(path, kPopulationHeader)) {
        WorkerRecord w;
        w.id = std::stoll(f[0]);
        if (f[1] != "F" && f[1] != "M") throw Error("parse", "bad gender '" + f[1] + "'");
        w.gender = f[1] == "F" ? Gender::F : Gender::M;
        w.dob_month = parse_month(f[2]);
        w.z = to_double(f[3]);
        w.c1 = to_double(f[4]);
        w.c2 = to_double(f[5]);
        w.s_pre = to_double(f[6]);
        w.pfa = std::stoi(f[7]);
        w.recipient = f[8] == "1" || f[8] == "true";
        if (!f[9].empty()) w.death_age_months = std::stoi(f[9]);
        pop.push_back(w);
    }
    return pop;
}

inline std::string panel_csv(const Panel& p, const Manifest& m) {
    std::string out = m.comment() + kPanelHeader + "\n";
    for (const auto& r : p.rows) {
        out += std::to_string(r.worker_id) + "," + format_month(r.period) + "," + num(r.taxable_earnings) + "," +
               (r.employed ? "1" : "0") + "," + num(r.net_of_tax_rate) + "," + (r.consumption ? num(*r.consumption) : "") +
               "\n";
    }
    return out;
}

inline Panel read_panel(const std::string& path) {
    Panel p;
    for (const auto& f : read_csv(path, kPanelHeader)) {
        PanelRow r;
        r.worker_id = std::stoll(f[0]);
        r.period = parse_month(f[1]);
        r.taxable_earnings = to_double(f[2]);
        r.employed = f[3] == "1" || f[3] == "true";
        r.net_of_tax_rate = to_double(f[4]);
        if (!f[5].empty()) r.consumption = to_double(f[5]);
        p.rows.push_back(r);
    }
    return p;
}

inline std::string estimate_csv(const econ::EstimateTable& t, const Manifest& m, const std::string& label) {
    std::string out = m.comment() + "coef,name,estimate,se,t,ci_lo,ci_hi\n";
    for (const auto& c : t.coefs)
        out += label + "," + c.name + "," + num(c.estimate) + "," + num(c.se) + "," + num(c.t) + "," + num(c.ci_lo) + "," +
               num(c.ci_hi) + "\n";
    return out;
}

inline std::string event_csv(const econ::EventPath& p, const Manifest& m) {
    std::string out = m.comment() + "event_time,estimate,se\n";
    for (const auto& e : p.points) out += std::to_string(e.event_time) + "," + num(e.estimate) + "," + num(e.se) + "\n";
    return out;
}

inline json to_json(const econ::EstimateTable& t) {
    json j;
    json coefs = json::array();
    for (const auto& c : t.coefs)
        coefs.push_back({{"name", c.name}, {"estimate", c.estimate}, {"se", c.se}, {"t", c.t}, {"ci95", {c.ci_lo, c.ci_hi}}});
    j["coefficients"] = coefs;
    j["n_obs"] = t.n_obs;
    j["r_squared"] = t.r_squared;
    if (t.first_stage_t) {
        j["first_stage_t"] = *t.first_stage_t;
        j["weak_instrument"] = t.weak_instrument;
    }
    if (t.cluster_count) j["cluster_count"] = *t.cluster_count;
    return j;
}

inline json to_json(const econ::EventPath& p) {
    json pts = json::array();
    for (const auto& e : p.points) pts.push_back({{"event_time", e.event_time}, {"estimate", e.estimate}, {"se", e.se}});
    return {{"points", pts},
            {"pre_wald", {{"stat", p.pre.stat}, {"df", p.pre.df}, {"p_value", p.pre.p_value}}},
            {"empty_times", p.empty_times}};
}

inline json to_json(const GradientDecomposition& g) {
    return {{"reform", to_string(g.reform)},
            {"social_insurance", g.social_insurance},
            {"inter_worker", g.inter_worker},
            {"fiscal_externality", g.fiscal_externality},
            {"bias_correction", g.bias_correction},
            {"total", g.total},
            {"money_metric_total", g.money_metric_total},
            {"mechanical_transfer", g.mechanical_transfer},
            {"gain_per_dollar", g.gain_per_dollar}};
}

inline json to_json(const MomentSet& m) {
    return {{"n", m.n},
            {"variant", to_string(m.variant)},
            {"implicit_tax", m.implicit_tax},
            {"mean_z", m.mean_z},
            {"mean_u1", m.mean_u1},
            {"mean_d", m.mean_d},
            {"cov_d_z", m.cov_d_z},
            {"cov_u1_z", m.cov_u1_z},
            {"weighted_z", m.weighted_z},
            {"recipient_share", m.recipient_share},
            {"half_mad_z", m.half_mad_z},
            {"survival_weighted", m.survival_weights.has_value()}};
}

inline json to_json(const OptimalDesign& d) {
    return {{"kappa_star", d.kappa_star},
            {"phi_star", d.phi_star},
            {"foc_residuals", {d.foc_residuals[0], d.foc_residuals[1]}},
            {"hessian_det", d.hessian_det},
            {"hessian_diagonal", {d.d2_kappa, d.d2_phi}},
            {"hessian_cross", d.cross},
            {"concave", d.concave},
            {"iterations", d.iterations},
            {"starts_converged", d.starts_converged},
            {"progressivity_share", d.progressivity_share}};
}

inline std::string dump(json j, const Manifest& m) {
    json out;
    out["manifest"] = m.to_json();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = it.value();
    return out.dump(2) + "\n";
}

}  // namespace pension::io
