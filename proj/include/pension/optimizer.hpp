#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "core.hpp"
#include "rng.hpp"
#include "welfare.hpp"

namespace pension {

struct Box {
    double kappa_lo = 0.02, kappa_hi = 0.6, phi_lo = 0.02, phi_hi = 0.98;

    bool contains(double k, double p) const { return k >= kappa_lo && k <= kappa_hi && p >= phi_lo && p <= phi_hi; }
    double kappa_width() const { return kappa_hi - kappa_lo; }
    double phi_width() const { return phi_hi - phi_lo; }
};

using Vec2 = std::array<double, 2>;

struct HessianDiagnostics {
    double det = 0, d2_kappa = 0, d2_phi = 0, cross = 0;
    bool concave() const { return det > 0 && d2_kappa < 0 && d2_phi < 0; }
};

struct OptimalDesign {
    double kappa_star = 0, phi_star = 0;
    Vec2 foc_residuals{0, 0};
    double hessian_det = 0, d2_kappa = 0, d2_phi = 0, cross = 0;
    bool concave = false;
    int iterations = 0;
    int starts_converged = 0;
    double progressivity_share = std::numeric_limits<double>::quiet_NaN();

    double residual_norm() const { return std::max(std::abs(foc_residuals[0]), std::abs(foc_residuals[1])); }
};

// The welfare gradient pair (dW/dkappa, dW/dphi) as a function of the design.
using FocMap = std::function<Vec2(double kappa, double phi)>;
using WelfareMap = std::function<double(double kappa, double phi)>;

struct SolverOptions {
    double tol = 1e-8;
    int starts = 5;
    int max_iter = 100;
    double agreement = 1e-6;
    int grid = 21;
};

namespace detail {

inline double radical_inverse(unsigned i, unsigned base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

inline double inf_norm(const Vec2& v) { return std::max(std::abs(v[0]), std::abs(v[1])); }

// Residual that treats infeasible designs (e.g. negative consumption) as infinitely bad.
inline std::optional<Vec2> try_foc(const FocMap& F, double k, double p) {
    try {
        Vec2 v = F(k, p);
        if (!std::isfinite(v[0]) || !std::isfinite(v[1])) return std::nullopt;
        return v;
    } catch (const Error&) {
        return std::nullopt;
    }
}

struct NewtonResult {
    bool converged = false;
    double k = 0, p = 0;
    Vec2 F{0, 0};
    int iterations = 0;
};

inline NewtonResult damped_newton(const FocMap& F, const Box& box, double k, double p, const SolverOptions& opt) {
    NewtonResult r;
    auto f0 = try_foc(F, k, p);
    if (!f0) return r;
    Vec2 f = *f0;
    const double hk = 1e-6 * box.kappa_width(), hp = 1e-6 * box.phi_width();
    for (int it = 0; it < opt.max_iter; ++it) {
        r.iterations = it;
        if (inf_norm(f) <= opt.tol) {
            r.converged = true;
            r.k = k;
            r.p = p;
            r.F = f;
            return r;
        }
        auto fkp = try_foc(F, k + hk, p), fkm = try_foc(F, k - hk, p);
        auto fpp = try_foc(F, k, p + hp), fpm = try_foc(F, k, p - hp);
        if (!fkp || !fkm || !fpp || !fpm) return r;
        Eigen::Matrix2d J;
        J << ((*fkp)[0] - (*fkm)[0]) / (2 * hk), ((*fpp)[0] - (*fpm)[0]) / (2 * hp),
            ((*fkp)[1] - (*fkm)[1]) / (2 * hk), ((*fpp)[1] - (*fpm)[1]) / (2 * hp);
        Eigen::Vector2d rhs(-f[0], -f[1]);
        Eigen::FullPivLU<Eigen::Matrix2d> lu(J);
        if (!lu.isInvertible() || std::abs(J.determinant()) < 1e-300) return r;
        Eigen::Vector2d dx = lu.solve(rhs);
        double lambda = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
            double kn = k + lambda * dx[0], pn = p + lambda * dx[1];
            if (!box.contains(kn, pn)) continue;
            auto fn = try_foc(F, kn, pn);
            if (!fn) continue;
            if (inf_norm(*fn) < inf_norm(f) || lambda < 1e-9) {
                k = kn;
                p = pn;
                f = *fn;
                moved = true;
                break;
            }
        }
        if (!moved) return r;
    }
    r.iterations = opt.max_iter;
    if (inf_norm(f) <= opt.tol) {
        r.converged = true;
        r.k = k;
        r.p = p;
        r.F = f;
    }
    return r;
}

}  // namespace detail

// Solves dW/dkappa = dW/dphi = 0 inside the box. Newton runs from several
// quasi-random starts; starts that leave the box are restarted from the best
// point of a coarse grid. All converged starts must agree.
inline OptimalDesign solve_optimum(const FocMap& F, const Box& box, const SolverOptions& opt = {},
                                   std::optional<Vec2> start = std::nullopt) {
    require(opt.tol > 0, "range", "tol must be positive");
    require(box.kappa_lo < box.kappa_hi && box.phi_lo < box.phi_hi, "range", "empty search box");
    std::vector<Vec2> starts;
    if (start) starts.push_back(*start);
    for (int i = 1; static_cast<int>(starts.size()) < std::max(1, opt.starts); ++i) {
        double u = detail::radical_inverse(static_cast<unsigned>(i), 2), v = detail::radical_inverse(static_cast<unsigned>(i), 3);
        starts.push_back({box.kappa_lo + (0.1 + 0.8 * u) * box.kappa_width(), box.phi_lo + (0.1 + 0.8 * v) * box.phi_width()});
    }
    std::optional<Vec2> grid_best;
    auto grid_start = [&]() -> std::optional<Vec2> {
        if (grid_best) return grid_best;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < opt.grid; ++i)
            for (int j = 0; j < opt.grid; ++j) {
                double k = box.kappa_lo + (i + 0.5) / opt.grid * box.kappa_width();
                double p = box.phi_lo + (j + 0.5) / opt.grid * box.phi_width();
                auto f = detail::try_foc(F, k, p);
                if (f && detail::inf_norm(*f) < best) {
                    best = detail::inf_norm(*f);
                    grid_best = Vec2{k, p};
                }
            }
        return grid_best;
    };
    std::vector<detail::NewtonResult> roots;
    int total_iter = 0;
    for (const auto& s : starts) {
        auto r = detail::damped_newton(F, box, s[0], s[1], opt);
        total_iter += r.iterations;
        if (!r.converged) {
            if (auto g = grid_start()) {
                r = detail::damped_newton(F, box, (*g)[0], (*g)[1], opt);
                total_iter += r.iterations;
            }
        }
        if (r.converged) roots.push_back(r);
    }
    if (roots.empty()) throw Error("no_root", "no interior root of the first-order conditions in the box");
    for (const auto& r : roots)
        if (std::abs(r.k - roots[0].k) > opt.agreement || std::abs(r.p - roots[0].p) > opt.agreement)
            throw Error("non_unique", "multi-start runs converged to different points");
    const auto& best = *std::min_element(roots.begin(), roots.end(), [](const auto& a, const auto& b) {
        return detail::inf_norm(a.F) < detail::inf_norm(b.F);
    });
    OptimalDesign d;
    d.kappa_star = best.k;
    d.phi_star = best.p;
    d.foc_residuals = best.F;
    d.iterations = total_iter;
    d.starts_converged = static_cast<int>(roots.size());
    return d;
}

// Central-difference Jacobian of the FOC map.
inline Eigen::Matrix2d foc_jacobian(const FocMap& F, const Box& box, double k, double p) {
    const double hk = 1e-6 * box.kappa_width(), hp = 1e-6 * box.phi_width();
    Vec2 a = F(k + hk, p), b = F(k - hk, p), c = F(k, p + hp), d = F(k, p - hp);
    Eigen::Matrix2d J;
    J << (a[0] - b[0]) / (2 * hk), (c[0] - d[0]) / (2 * hp), (a[1] - b[1]) / (2 * hk), (c[1] - d[1]) / (2 * hp);
    return J;
}

// Newton with a Jacobian frozen from a nearby problem (one FOC evaluation per
// step). Falls back to a single damped-Newton start, then the grid, when the
// iteration stops contracting. Meant for bootstrap replicates.
inline OptimalDesign warm_solve(const FocMap& F, const Box& box, const SolverOptions& opt, Vec2 start,
                                const Eigen::Matrix2d& J) {
    Eigen::FullPivLU<Eigen::Matrix2d> lu(J);
    if (lu.isInvertible()) {
        double k = start[0], p = start[1];
        auto f = detail::try_foc(F, k, p);
        for (int it = 0; f && it < opt.max_iter; ++it) {
            if (detail::inf_norm(*f) <= opt.tol) {
                OptimalDesign d;
                d.kappa_star = k;
                d.phi_star = p;
                d.foc_residuals = *f;
                d.iterations = it;
                d.starts_converged = 1;
                return d;
            }
            Eigen::Vector2d dx = lu.solve(Eigen::Vector2d(-(*f)[0], -(*f)[1]));
            if (!box.contains(k + dx[0], p + dx[1])) break;
            auto fn = detail::try_foc(F, k + dx[0], p + dx[1]);
            if (!fn || detail::inf_norm(*fn) > 0.9 * detail::inf_norm(*f)) break;
            k += dx[0];
            p += dx[1];
            f = fn;
        }
    }
    SolverOptions one = opt;
    one.starts = 1;
    return solve_optimum(F, box, one, start);
}

// Central second differences; the cross term averages both orders.
inline HessianDiagnostics hessian_diagnostics(const WelfareMap& W, double k, double p, double hk, double hp,
                                              const std::optional<Box>& box = std::nullopt) {
    require(hk > 0 && hp > 0, "range", "step must be positive");
    if (box)
        require(k - hk >= box->kappa_lo && k + hk <= box->kappa_hi && p - hp >= box->phi_lo && p + hp <= box->phi_hi,
                "boundary", "point within one step of the box boundary");
    double w0 = W(k, p);
    HessianDiagnostics h;
    h.d2_kappa = (W(k + hk, p) - 2 * w0 + W(k - hk, p)) / (hk * hk);
    h.d2_phi = (W(k, p + hp) - 2 * w0 + W(k, p - hp)) / (hp * hp);
    double pp = W(k + hk, p + hp), pm = W(k + hk, p - hp), mp = W(k - hk, p + hp), mm = W(k - hk, p - hp);
    double c1 = ((pp - mp) - (pm - mm)) / (4 * hk * hp);
    double c2 = ((pp - pm) - (mp - mm)) / (4 * hk * hp);
    h.cross = 0.5 * (c1 + c2);
    h.det = h.d2_kappa * h.d2_phi - h.cross * h.cross;
    return h;
}

// Share of lifetime pension income going to workers below the lower median of
// z (ties broken by id). Lifetime income is omega*(self-funded + subsidy) + b.
inline double progressivity_share(const std::vector<double>& z, const std::vector<std::int64_t>& id,
                                  const std::vector<double>& omega, const std::vector<double>& self_funded,
                                  const std::vector<double>& subsidy, double lump_sum) {
    const std::size_t n = z.size();
    require(n > 0, "empty", "empty population");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return z[a] != z[b] ? z[a] < z[b] : (id.empty() ? a < b : id[a] < id[b]);
    });
    auto benefit = [&](std::size_t i) { return omega[i] * (self_funded[i] + subsidy[i]) + lump_sum; };
    double total = pairwise_sum(0, n, [&](std::size_t r) { return benefit(order[r]); });
    double low = pairwise_sum(0, n / 2, [&](std::size_t r) { return benefit(order[r]); });
    require(total > 0, "degenerate", "zero pension spending");
    return low / total;
}

// Progressivity with earnings held at the sample values.
inline double progressivity_share(const PolicyParams& p, const WelfareSample& s) {
    s.check();
    std::vector<double> a, sub;
    WelfareModel::pensions(p, s.z, a, sub);
    double wz = pairwise_mean(s.size(), [&](std::size_t i) { return s.omega[i] * s.z[i]; });
    return progressivity_share(s.z, s.id, s.omega, a, sub, WelfareModel::statutory_lump_sum(p, wz));
}

inline double progressivity_share(const ModelState& st, const WelfareSample& s) {
    return progressivity_share(st.z, s.id, s.omega, st.self_funded, st.subsidy, st.lump_sum);
}

// Design problem on an anchored model: the target rule is linear, keeps the
// anchor's tau, R and exogenous spending, and inherits the anchor's subsidy
// budget through the lump sum.
class DesignProblem {
public:
    DesignProblem(const WelfareModel& model, const GradientOptions& gopt = {}) : model_(model), gopt_(gopt) {}

    PolicyParams target(double k, double p) const {
        PolicyParams q = model_.anchor();
        q.variant = Variant::Linear;
        q.kappa = k;
        q.phi = p;
        q.PBS = 0;
        q.PMAS = 0;
        return q;
    }

    Vec2 foc(double k, double p) const {
        auto [s, q] = model_.evaluated_at(target(k, p));
        MomentSet M = compute_moments(s, model_.behavioral(), q, {}, 1);
        return {gradient(q, model_.behavioral(), M, Reform::Kappa, gopt_).total,
                gradient(q, model_.behavioral(), M, Reform::Phi, gopt_).total};
    }

    FocMap foc_map() const {
        return [this](double k, double p) { return foc(k, p); };
    }

    // Model re-anchored at (k, p); its welfare has zero slope wherever the FOCs vanish.
    WelfareModel local_model(double k, double p) const {
        auto [s, q] = model_.evaluated_at(target(k, p));
        return WelfareModel(std::move(s), q, model_.behavioral(), model_.frisch());
    }

    OptimalDesign solve(const Box& box, const SolverOptions& opt = {}, std::optional<Vec2> start = std::nullopt) const {
        OptimalDesign d = solve_optimum(foc_map(), box, opt, start);
        WelfareModel local = local_model(d.kappa_star, d.phi_star);
        PolicyParams base = local.anchor();
        WelfareMap W = [&](double k, double p) {
            PolicyParams q = base;
            q.kappa = k;
            q.phi = p;
            return local.welfare(q);
        };
        double hk = 1e-4 * box.kappa_width(), hp = 1e-4 * box.phi_width();
        HessianDiagnostics h = hessian_diagnostics(W, d.kappa_star, d.phi_star, hk, hp);
        d.hessian_det = h.det;
        d.d2_kappa = h.d2_kappa;
        d.d2_phi = h.d2_phi;
        d.cross = h.cross;
        d.concave = h.concave();
        d.progressivity_share = progressivity_share(model_.state(target(d.kappa_star, d.phi_star)), model_.sample());
        return d;
    }

    const WelfareModel& model() const { return model_; }

private:
    const WelfareModel& model_;
    GradientOptions gopt_;
};

struct PercentileInterval {
    double lo = 0, hi = 0;
};

struct BootstrapResult {
    std::vector<std::optional<OptimalDesign>> replicates;  // indexed by replicate
    int failures = 0;
    PercentileInterval kappa, phi;
    std::vector<Vec2> hull;  // convex hull of the central 95% by Mahalanobis depth
};

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& v, double q) {
    require(!v.empty(), "empty", "quantile of empty data");
    double pos = q * (v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<Vec2> h(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
        h[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
        h[k++] = pts[i - 1];
    }
    h.resize(k - 1);
    return h;
}

inline std::vector<Vec2> mahalanobis_region(const std::vector<Vec2>& pts, double coverage = 0.95) {
    const std::size_t n = pts.size();
    if (n < 3) return pts;
    double mk = 0, mp = 0;
    for (const auto& x : pts) {
        mk += x[0];
        mp += x[1];
    }
    mk /= n;
    mp /= n;
    double skk = 0, spp = 0, skp = 0;
    for (const auto& x : pts) {
        skk += (x[0] - mk) * (x[0] - mk);
        spp += (x[1] - mp) * (x[1] - mp);
        skp += (x[0] - mk) * (x[1] - mp);
    }
    double det = skk * spp - skp * skp;
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = pts[i][0] - mk, b = pts[i][1] - mp;
        double d2 = det > 0 ? (spp * a * a - 2 * skp * a * b + skk * b * b) / det : a * a + b * b;
        dist[i] = {d2, i};
    }
    std::sort(dist.begin(), dist.end());
    std::size_t keep = static_cast<std::size_t>(std::ceil(coverage * n));
    std::vector<Vec2> central;
    for (std::size_t r = 0; r < keep; ++r) central.push_back(pts[dist[r].second]);
    return convex_hull(central);
}

using Pipeline = std::function<OptimalDesign(const WelfareSample&)>;

// Pairs bootstrap over whole worker records. Replicate r draws its indices
// from its own stream, so the output does not depend on scheduling.
inline BootstrapResult pairs_bootstrap(const WelfareSample& s, const Pipeline& pipeline, int B, std::uint64_t seed,
                                       unsigned threads = 0, double failure_budget = 0.05) {
    require(B >= 2, "range", "need at least two replicates");
    s.check();
    BootstrapResult out;
    out.replicates.resize(static_cast<std::size_t>(B));
    const std::size_t n = s.size();
    parallel_for(
        static_cast<std::size_t>(B),
        [&](std::size_t r) {
            Stream st(seed, r, Purpose::Bootstrap);
            std::vector<std::size_t> idx(n);
            for (auto& i : idx) i = static_cast<std::size_t>(st.below(n));
            try {
                out.replicates[r] = pipeline(s.subset(idx));
            } catch (const Error&) {
                out.replicates[r].reset();
            }
        },
        threads);
    std::vector<double> ks, ps;
    std::vector<Vec2> pts;
    for (const auto& r : out.replicates) {
        if (!r) {
            ++out.failures;
            continue;
        }
        ks.push_back(r->kappa_star);
        ps.push_back(r->phi_star);
        pts.push_back({r->kappa_star, r->phi_star});
    }
    if (out.failures > failure_budget * B)
        throw Error("bootstrap", std::to_string(out.failures) + " of " + std::to_string(B) + " replicates failed");
    std::sort(ks.begin(), ks.end());
    std::sort(ps.begin(), ps.end());
    out.kappa = {quantile_sorted(ks, 0.025), quantile_sorted(ks, 0.975)};
    out.phi = {quantile_sorted(ps, 0.025), quantile_sorted(ps, 0.975)};
    out.hull = mahalanobis_region(pts);
    return out;
}

enum class SweepParam { Gamma, Theta, Beta };

inline const char* to_string(SweepParam p) {
    return p == SweepParam::Gamma ? "gamma" : p == SweepParam::Theta ? "theta" : "beta";
}

struct SweepPoint {
    double value = 0;
    double gain_kappa = 0, gain_phi = 0;
    double bias_kappa = 0, bias_phi = 0;
    double rational_drop = std::numeric_limits<double>::quiet_NaN();  // theta sweep only
};

// Gains per dollar at the status quo as one preference parameter moves.
inline std::vector<SweepPoint> comparative_statics(const WelfareSample& s, const PolicyParams& p,
                                                   const BehavioralParams& behav, SweepParam param,
                                                   const std::vector<double>& grid, const GradientOptions& gopt = {},
                                                   const MomentOptions& mopt = {}) {
    std::vector<SweepPoint> out;
    for (double v : grid) {
        BehavioralParams b = behav;
        if (param == SweepParam::Gamma) b.gamma = v;
        if (param == SweepParam::Theta) b.theta = v;
        if (param == SweepParam::Beta) b.beta = v;
        b.validate();
        MomentSet M = compute_moments(s, b, p, mopt);
        auto gk = gradient(p, b, M, Reform::Kappa, gopt);
        auto gp = gradient(p, b, M, Reform::Phi, gopt);
        SweepPoint pt;
        pt.value = v;
        pt.gain_kappa = money_metric(gk, M, p, gopt.retired_numeraire).gain_per_dollar;
        pt.gain_phi = money_metric(gp, M, p, gopt.retired_numeraire).gain_per_dollar;
        pt.bias_kappa = gk.bias_correction;
        pt.bias_phi = gp.bias_correction;
        if (param == SweepParam::Theta) pt.rational_drop = 1.0 - std::pow(v, 1.0 / b.gamma);
        out.push_back(pt);
    }
    return out;
}

struct PlantedScenario {
    WelfareSample sample;
    PolicyParams policy;  // linear rule at the planted optimum
};

// Rescales retirement consumption and picks tau so that both FOCs vanish at
// (kappa0, phi0) for a model anchored there.
inline PlantedScenario plant_optimum(const WelfareSample& s, const BehavioralParams& b, double kappa0, double phi0,
                                     double E_bar, double R = 1.042) {
    auto build = [&](double log_scale, double tau) {
        PlantedScenario ps;
        ps.sample = s;
        for (auto& c : ps.sample.c2) c *= std::exp(log_scale);
        ps.policy.kappa = kappa0;
        ps.policy.phi = phi0;
        ps.policy.tau = tau;
        ps.policy.R = R;
        ps.policy.E_bar = E_bar;
        return ps;
    };
    auto residual = [&](double x, double t) -> Vec2 {
        auto ps = build(x, t);
        MomentSet M = compute_moments(ps.sample, b, ps.policy, {}, 1);
        return {gradient(ps.policy, b, M, Reform::Kappa).total, gradient(ps.policy, b, M, Reform::Phi).total};
    };
    double x = 0.0, t = 0.05;
    for (int it = 0; it < 200; ++it) {
        Vec2 f = residual(x, t);
        if (detail::inf_norm(f) < 1e-13) break;
        const double h = 1e-7;
        Vec2 fx1 = residual(x + h, t), fx0 = residual(x - h, t), ft1 = residual(x, t + h), ft0 = residual(x, t - h);
        Eigen::Matrix2d J;
        J << (fx1[0] - fx0[0]) / (2 * h), (ft1[0] - ft0[0]) / (2 * h), (fx1[1] - fx0[1]) / (2 * h),
            (ft1[1] - ft0[1]) / (2 * h);
        Eigen::Vector2d dx = J.fullPivLu().solve(Eigen::Vector2d(-f[0], -f[1]));
        double lam = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40 && !moved; ++ls, lam *= 0.5) {
            double xn = x + lam * dx[0], tn = t + lam * dx[1];
            if (tn < 0 || tn + kappa0 >= 0.95) continue;
            Vec2 fn = residual(xn, tn);
            if (detail::inf_norm(fn) < detail::inf_norm(f)) {
                x = xn;
                t = tn;
                moved = true;
            }
        }
        // No progress: typically the contribution-rate condition stays positive
        // however much retirement consumption is scaled.
        if (!moved) break;
    }
    Vec2 f = residual(x, t);
    require(detail::inf_norm(f) < 1e-10, "no_root", "could not plant the optimum at this (kappa, phi)");
    return build(x, t);
}

}  // namespace pension
