#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "../common.hpp"

namespace pension::econ {

// Column store of doubles. Categorical columns (FE, clusters) hold integer codes.
class Frame {
public:
    Frame() = default;
    explicit Frame(std::size_t n) : n_(n) {}

    std::size_t rows() const { return n_; }

    void add(const std::string& name, std::vector<double> v) {
        if (cols_.empty() && n_ == 0) n_ = v.size();
        require(v.size() == n_, "shape", "column '" + name + "' has the wrong length");
        cols_[name] = std::move(v);
    }

    bool has(const std::string& name) const { return cols_.count(name) > 0; }

    const std::vector<double>& at(const std::string& name) const {
        auto it = cols_.find(name);
        if (it == cols_.end()) throw Error("spec", "no column named '" + name + "'");
        return it->second;
    }

    std::vector<double>& at(const std::string& name) {
        auto it = cols_.find(name);
        if (it == cols_.end()) throw Error("spec", "no column named '" + name + "'");
        return it->second;
    }

    // Rows where keep[i] is true, in order.
    Frame filter(const std::vector<char>& keep) const {
        require(keep.size() == n_, "shape", "filter mask has the wrong length");
        Frame out;
        out.n_ = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), 1));
        for (const auto& [k, v] : cols_) {
            std::vector<double> w;
            w.reserve(out.n_);
            for (std::size_t i = 0; i < n_; ++i)
                if (keep[i]) w.push_back(v[i]);
            out.cols_[k] = std::move(w);
        }
        return out;
    }

    Frame permuted(const std::vector<std::size_t>& order) const {
        Frame out(n_);
        for (const auto& [k, v] : cols_) {
            std::vector<double> w(n_);
            for (std::size_t i = 0; i < n_; ++i) w[i] = v[order[i]];
            out.cols_[k] = std::move(w);
        }
        return out;
    }

private:
    std::size_t n_ = 0;
    std::map<std::string, std::vector<double>> cols_;
};

struct RegressionSpec {
    std::string outcome;
    std::vector<std::string> regressors;   // exogenous, included
    std::vector<std::string> endogenous;   // instrumented
    std::vector<std::string> instruments;  // excluded instruments
    std::vector<std::string> fixed_effects;
    std::optional<std::string> cluster;
    std::string sample_filter;  // description only; callers filter the frame

    void validate(const Frame& f) const {
        require(!outcome.empty(), "spec", "no outcome");
        require(instruments.size() >= endogenous.size(), "spec", "fewer instruments than endogenous regressors");
        auto need = [&](const std::string& c) { require(f.has(c), "spec", "no column named '" + c + "'"); };
        need(outcome);
        for (const auto& c : regressors) need(c);
        for (const auto& c : endogenous) need(c);
        for (const auto& c : instruments) need(c);
        for (const auto& c : fixed_effects) need(c);
        if (cluster) need(*cluster);
        require(!regressors.empty() || !endogenous.empty(), "spec", "no regressors");
    }
};

struct Coefficient {
    std::string name;
    double estimate = 0, se = 0, t = 0, ci_lo = 0, ci_hi = 0;
};

struct EstimateTable {
    std::vector<Coefficient> coefs;
    std::size_t n_obs = 0;
    double r_squared = 0;  // within R^2 when fixed effects are absorbed
    std::optional<double> first_stage_t;
    std::optional<std::size_t> cluster_count;
    bool weak_instrument = false;
    Eigen::MatrixXd vcov;

    const Coefficient& at(const std::string& name) const {
        for (const auto& c : coefs)
            if (c.name == name) return c;
        throw Error("spec", "no coefficient named '" + name + "'");
    }
};

// Dense integer codes in order of first appearance after sorting the values.
inline std::vector<std::uint32_t> encode(const std::vector<double>& v, std::size_t* levels = nullptr) {
    std::vector<double> u(v);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<std::uint32_t> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<std::uint32_t>(std::lower_bound(u.begin(), u.end(), v[i]) - u.begin());
    if (levels) *levels = u.size();
    return out;
}

// Alternating projections until no column moves by more than tol.
inline void absorb(Eigen::MatrixXd& X, const std::vector<std::vector<std::uint32_t>>& groups,
                   const std::vector<std::size_t>& levels, double tol = 1e-10, int max_iter = 10000) {
    if (groups.empty()) return;
    const Eigen::Index n = X.rows();
    std::vector<std::vector<double>> counts(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        counts[g].assign(levels[g], 0.0);
        for (Eigen::Index i = 0; i < n; ++i) counts[g][groups[g][i]] += 1.0;
    }
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
        double scale = std::max(1.0, X.col(c).cwiseAbs().maxCoeff());
        for (int it = 0; it < max_iter; ++it) {
            double moved = 0.0;
            for (std::size_t g = 0; g < groups.size(); ++g) {
                std::vector<double> sums(levels[g], 0.0);
                const auto& gr = groups[g];
                for (Eigen::Index i = 0; i < n; ++i) sums[gr[i]] += X(i, c);
                for (std::size_t l = 0; l < levels[g]; ++l) {
                    sums[l] /= counts[g][l];
                    moved = std::max(moved, std::abs(sums[l]));
                }
                for (Eigen::Index i = 0; i < n; ++i) X(i, c) -= sums[gr[i]];
            }
            if (groups.size() == 1 || moved <= tol * scale) break;
        }
    }
}

namespace detail {

struct Design {
    Eigen::MatrixXd M;  // columns: outcome, regressors..., endogenous..., instruments...
    std::size_t k_fe = 0;
    std::vector<std::uint32_t> cluster;
    std::size_t clusters = 0;
    bool has_cluster = false;
    double tss = 0;
};

inline Design build(const Frame& f, const RegressionSpec& s) {
    s.validate(f);
    const std::size_t n = f.rows();
    require(n > 0, "empty", "no observations");
    std::vector<std::string> cols{s.outcome};
    cols.insert(cols.end(), s.regressors.begin(), s.regressors.end());
    cols.insert(cols.end(), s.endogenous.begin(), s.endogenous.end());
    cols.insert(cols.end(), s.instruments.begin(), s.instruments.end());
    // Rows are processed in a canonical order so results do not depend on
    // how the frame happens to be sorted.
    std::vector<const std::vector<double>*> keys;
    for (const auto& c : s.fixed_effects) keys.push_back(&f.at(c));
    if (s.cluster) keys.push_back(&f.at(*s.cluster));
    for (const auto& c : cols) keys.push_back(&f.at(c));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        for (const auto* k : keys)
            if ((*k)[a] != (*k)[b]) return (*k)[a] < (*k)[b];
        return false;
    });
    auto column = [&](const std::string& name) {
        const auto& v = f.at(name);
        std::vector<double> w(n);
        for (std::size_t i = 0; i < n; ++i) w[i] = v[order[i]];
        return w;
    };
    Design d;
    // Explicit intercept when nothing is absorbed.
    const bool intercept = s.fixed_effects.empty();
    d.M.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size() + (intercept ? 1 : 0)));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& v = f.at(cols[c]);
        for (std::size_t i = 0; i < n; ++i) {
            double x = v[order[i]];
            require(std::isfinite(x), "data", "non-finite value in column '" + cols[c] + "'");
            d.M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x;
        }
    }
    if (intercept) d.M.col(d.M.cols() - 1).setOnes();
    std::vector<std::vector<std::uint32_t>> groups;
    std::vector<std::size_t> levels;
    for (const auto& fe : s.fixed_effects) {
        std::size_t L = 0;
        groups.push_back(encode(column(fe), &L));
        levels.push_back(L);
    }
    if (!groups.empty()) {
        d.k_fe = 1;
        for (auto L : levels) d.k_fe += L - 1;
        absorb(d.M, groups, levels);
    }
    if (s.cluster) {
        d.has_cluster = true;
        d.cluster = encode(column(*s.cluster), &d.clusters);
        require(d.clusters >= 2, "clusters", "fewer than two clusters");
    }
    Eigen::VectorXd y = d.M.col(0);
    d.tss = groups.empty() ? (y.array() - y.mean()).square().sum() : y.squaredNorm();
    return d;
}

inline Eigen::MatrixXd sandwich(const Eigen::MatrixXd& X, const Eigen::VectorXd& e, const Eigen::MatrixXd& XtXi,
                                const Design& d, std::size_t K) {
    const Eigen::Index n = X.rows(), k = X.cols();
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    double factor;
    if (d.has_cluster) {
        Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.clusters), k);
        for (Eigen::Index i = 0; i < n; ++i) scores.row(d.cluster[i]) += X.row(i) * e[i];
        meat = scores.transpose() * scores;
        double G = static_cast<double>(d.clusters);
        factor = G / (G - 1.0) * (n - 1.0) / (static_cast<double>(n) - static_cast<double>(K));
    } else {
        Eigen::MatrixXd Xe = X.array().colwise() * e.array();
        meat = Xe.transpose() * Xe;
        factor = static_cast<double>(n) / (static_cast<double>(n) - static_cast<double>(K));
    }
    return factor * XtXi * meat * XtXi;
}

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        std::string which;
        auto P = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < X.cols(); ++j) which += (which.empty() ? "" : ", ") + names[P[j]];
        throw Error("singular", "collinear regressors after absorbing fixed effects: " + which);
    }
    Eigen::MatrixXd XtX = X.transpose() * X;
    return XtX.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
}

inline EstimateTable table(const std::vector<std::string>& names, const Eigen::VectorXd& b, const Eigen::MatrixXd& V,
                           std::size_t n, double r2, const Design& d) {
    EstimateTable t;
    t.n_obs = n;
    t.r_squared = r2;
    t.vcov = V;
    if (d.has_cluster) t.cluster_count = d.clusters;
    for (std::size_t j = 0; j < names.size(); ++j) {
        Coefficient c;
        c.name = names[j];
        c.estimate = b[static_cast<Eigen::Index>(j)];
        c.se = std::sqrt(std::max(0.0, V(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
        c.t = c.se > 0 ? c.estimate / c.se : 0.0;
        c.ci_lo = c.estimate - 1.96 * c.se;
        c.ci_hi = c.estimate + 1.96 * c.se;
        t.coefs.push_back(c);
    }
    return t;
}

}  // namespace detail

// OLS with absorbed fixed effects. Regressors listed in `endogenous` are
// treated as ordinary regressors here.
inline EstimateTable ols_fe(const Frame& f, RegressionSpec s) {
    s.regressors.insert(s.regressors.begin(), s.endogenous.begin(), s.endogenous.end());
    s.endogenous.clear();
    s.instruments.clear();
    auto d = detail::build(f, s);
    const Eigen::Index n = d.M.rows();
    const Eigen::Index k = static_cast<Eigen::Index>(s.regressors.size()) + (s.fixed_effects.empty() ? 1 : 0);
    std::vector<std::string> names = s.regressors;
    if (s.fixed_effects.empty()) names.push_back("const");
    Eigen::MatrixXd X = d.M.middleCols(1, k);
    Eigen::VectorXd y = d.M.col(0);
    Eigen::MatrixXd XtXi = detail::checked_inverse(X, names);
    Eigen::VectorXd b = XtXi * (X.transpose() * y);
    Eigen::VectorXd e = y - X * b;
    std::size_t K = static_cast<std::size_t>(s.regressors.size()) + (s.fixed_effects.empty() ? 1 : d.k_fe);
    require(static_cast<std::size_t>(n) > K, "singular", "fewer observations than parameters");
    Eigen::MatrixXd V = detail::sandwich(X, e, XtXi, d, K);
    double r2 = d.tss > 0 ? 1.0 - e.squaredNorm() / d.tss : 0.0;
    return detail::table(names, b, V, static_cast<std::size_t>(n), r2, d);
}

// Two-stage least squares. Coefficients are reported endogenous first.
inline EstimateTable tsls(const Frame& f, const RegressionSpec& s) {
    require(!s.endogenous.empty(), "spec", "tsls needs an endogenous regressor");
    auto d = detail::build(f, s);
    const Eigen::Index n = d.M.rows();
    const bool intercept = s.fixed_effects.empty();
    const Eigen::Index kx = static_cast<Eigen::Index>(s.regressors.size());
    const Eigen::Index ke = static_cast<Eigen::Index>(s.endogenous.size());
    const Eigen::Index kz = static_cast<Eigen::Index>(s.instruments.size());
    Eigen::VectorXd y = d.M.col(0);
    Eigen::MatrixXd Wx(n, kx + (intercept ? 1 : 0));
    Wx.leftCols(kx) = d.M.middleCols(1, kx);
    if (intercept) Wx.col(kx) = d.M.col(d.M.cols() - 1);
    Eigen::MatrixXd En = d.M.middleCols(1 + kx, ke);
    Eigen::MatrixXd Z(n, kz + Wx.cols());
    Z.leftCols(kz) = d.M.middleCols(1 + kx + ke, kz);
    Z.rightCols(Wx.cols()) = Wx;

    std::vector<std::string> znames = s.instruments;
    znames.insert(znames.end(), s.regressors.begin(), s.regressors.end());
    if (intercept) znames.push_back("const");
    Eigen::MatrixXd ZtZi = detail::checked_inverse(Z, znames);
    std::size_t Kfs = static_cast<std::size_t>(Z.cols()) + (intercept ? 0 : d.k_fe);
    Eigen::MatrixXd Pi = ZtZi * (Z.transpose() * En);
    Eigen::MatrixXd Ehat = Z * Pi;

    // First-stage t of the first excluded instrument.
    EstimateTable out;
    {
        Eigen::VectorXd e1 = En.col(0) - Ehat.col(0);
        Eigen::MatrixXd V1 = detail::sandwich(Z, e1, ZtZi, d, Kfs);
        double se = std::sqrt(V1(0, 0));
        out.first_stage_t = se > 0 ? Pi(0, 0) / se : 0.0;
    }

    Eigen::MatrixXd Xh(n, ke + Wx.cols()), X(n, ke + Wx.cols());
    Xh << Ehat, Wx;
    X << En, Wx;
    std::vector<std::string> names = s.endogenous;
    names.insert(names.end(), s.regressors.begin(), s.regressors.end());
    if (intercept) names.push_back("const");
    Eigen::MatrixXd XhXi = detail::checked_inverse(Xh, names);
    Eigen::VectorXd b = XhXi * (Xh.transpose() * y);
    Eigen::VectorXd e = y - X * b;  // structural residuals
    std::size_t K = static_cast<std::size_t>(X.cols()) + (intercept ? 0 : d.k_fe);
    require(static_cast<std::size_t>(n) > K, "singular", "fewer observations than parameters");
    Eigen::MatrixXd V = detail::sandwich(Xh, e, XhXi, d, K);
    double r2 = d.tss > 0 ? 1.0 - e.squaredNorm() / d.tss : 0.0;
    auto t = detail::table(names, b, V, static_cast<std::size_t>(n), r2, d);
    t.first_stage_t = out.first_stage_t;
    t.weak_instrument = std::abs(*t.first_stage_t) < 10.0;
    return t;
}

struct Wald {
    double stat = 0;
    std::size_t df = 0;
    double p_value = 1;
};

inline Wald wald_zero(const EstimateTable& t, const std::vector<std::string>& names) {
    Wald w;
    if (names.empty()) return w;
    std::vector<Eigen::Index> idx;
    for (const auto& nm : names)
        for (std::size_t j = 0; j < t.coefs.size(); ++j)
            if (t.coefs[j].name == nm) idx.push_back(static_cast<Eigen::Index>(j));
    const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
    Eigen::VectorXd b(k);
    Eigen::MatrixXd V(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        b[a] = t.coefs[idx[a]].estimate;
        for (Eigen::Index c = 0; c < k; ++c) V(a, c) = t.vcov(idx[a], idx[c]);
    }
    w.stat = b.dot(V.ldlt().solve(b));
    w.df = static_cast<std::size_t>(k);
    boost::math::chi_squared dist(static_cast<double>(k));
    w.p_value = boost::math::cdf(boost::math::complement(dist, std::max(0.0, w.stat)));
    return w;
}

struct EventPoint {
    int event_time = 0;
    double estimate = 0, se = 0, ci_lo = 0, ci_hi = 0;
};

struct EventPath {
    std::vector<EventPoint> points;  // includes the omitted time with estimate 0
    Wald pre;                        // joint test that all pre-period terms are zero
    std::vector<int> empty_times;
    EstimateTable table;
};

// Event-time dummies for every value of `event_col` in [lo, hi] except
// normalize_at. Rows with a missing (NaN) event time act as controls; event
// times outside the window are binned into the end points.
inline EventPath event_study(const Frame& f, RegressionSpec s, const std::string& event_col, int lo, int hi,
                             int normalize_at) {
    require(lo <= normalize_at && normalize_at <= hi, "range", "normalize_at outside the window");
    const auto& ev = f.at(event_col);
    Frame g = f;
    EventPath out;
    std::vector<std::string> dummies;
    std::vector<int> times;
    for (int k = lo; k <= hi; ++k) {
        if (k == normalize_at) continue;
        std::vector<double> d(f.rows(), 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < f.rows(); ++i) {
            if (std::isnan(ev[i])) continue;
            int e = static_cast<int>(std::lround(ev[i]));
            e = std::clamp(e, lo, hi);
            if (e == k) {
                d[i] = 1.0;
                ++count;
            }
        }
        if (count == 0) {
            out.empty_times.push_back(k);
            continue;
        }
        std::string name = "event_" + std::string(k < 0 ? "m" : "p") + std::to_string(std::abs(k));
        g.add(name, std::move(d));
        dummies.push_back(name);
        times.push_back(k);
    }
    s.regressors.insert(s.regressors.begin(), dummies.begin(), dummies.end());
    out.table = s.endogenous.empty() ? ols_fe(g, s) : tsls(g, s);
    std::vector<std::string> pre;
    for (std::size_t j = 0; j < dummies.size(); ++j) {
        const auto& c = out.table.at(dummies[j]);
        out.points.push_back({times[j], c.estimate, c.se, c.ci_lo, c.ci_hi});
        if (times[j] < normalize_at) pre.push_back(dummies[j]);
    }
    out.points.push_back({normalize_at, 0.0, 0.0, 0.0, 0.0});
    std::sort(out.points.begin(), out.points.end(), [](const auto& a, const auto& b) { return a.event_time < b.event_time; });
    out.pre = wald_zero(out.table, pre);
    return out;
}

}  // namespace pension::econ
