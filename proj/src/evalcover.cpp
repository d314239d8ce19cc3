#include "voxlab/evalcover.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "voxlab/rng.hpp"
#include "voxlab/spanner.hpp"

namespace voxlab {

DpSolution solve_single_layer(const LowRankMdp& env, int h, const Mat& reward) {
    RewardTables tables(static_cast<std::size_t>(h));
    tables.back() = reward;
    return solve_dp(env, tables, h);
}

namespace {

Mat layer_reward(const LowRankMdp& env, const FeatureMap& phi, int h, const std::function<double(const Vec&)>& g) {
    Mat r(env.num_states(h), env.num_actions());
    for (int x = 0; x < r.rows(); ++x)
        for (int a = 0; a < r.cols(); ++a) r(x, a) = g(phi.at(h, x, a).transpose());
    return r;
}

double lambda_min(const Mat& M) {
    return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly).eigenvalues()(0);
}

}  // namespace

CoverReport check_policy_cover(const LowRankMdp& env, const PolicyDistribution& P, int h, double alpha, double eps,
                               CoverKind kind, double budget, double slack) {
    env.check_layer(h);
    if (P.empty()) throw Error("check_policy_cover: empty policy distribution");
    if (max_occupancy_cost(env, h) > budget)
        throw Error("check_policy_cover: brute-force budget exceeded at layer " + std::to_string(h));
    CoverReport rep;
    rep.best = max_occupancy(env, h);
    if (kind == CoverKind::randomized) {
        rep.achieved = exact_occupancy(env, P, h);
    } else {
        rep.achieved = Vec::Zero(rep.best.size());
        for (const auto& e : P.entries()) rep.achieved = rep.achieved.cwiseMax(exact_occupancy(env, *e.policy, h));
    }
    rep.measured_alpha = std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < rep.best.size(); ++x) {
        const double norm = h == 1 ? 1.0 : env.mu(h).row(x).norm();
        const double best = rep.best(x);
        if (best <= 0.0 || best < eps * norm) continue;
        ++rep.qualifying;
        rep.measured_alpha = std::min(rep.measured_alpha, rep.achieved(x) / best);
        if (rep.achieved(x) < alpha * best - slack) {
            rep.pass = false;
            rep.witnesses.push_back({static_cast<int>(x), rep.achieved(x), best});
        }
    }
    return rep;
}

DesignCheck check_design_on_policies(const LowRankMdp& env, const FeatureMap& phi, const PolicyDistribution& P,
                                     double gamma, double C, int h) {
    const int d = phi.dim();
    Mat M = gamma * Mat::Identity(d, d) + exact_second_moment(env, P, phi, h);
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw Error("check_design_on_policies: M_P is singular; use gamma > 0");
    Mat Minv = llt.solve(Mat::Identity(d, d));
    Minv = 0.5 * (Minv + Minv.transpose());
    DpSolution sol = solve_single_layer(env, h, layer_reward(env, phi, h, [&](const Vec& v) { return v.dot(Minv * v); }));
    DesignCheck out;
    out.sup = sol.value;
    out.bound = (1.0 + 1.5 * C) * d;
    out.pass = out.sup <= out.bound;
    out.argmax = sol.policy;
    return out;
}

double pdl_check(const LowRankMdp& env, const Policy& pi, const Policy& pi_star, const RewardTables& rewards, int h) {
    PolicyEvaluation ev = evaluate_policy(env, pi, rewards, h);
    PolicyEvaluation ev_star = evaluate_policy(env, pi_star, rewards, h);
    double rhs = 0.0;
    for (int t = 1; t <= h; ++t) {
        Vec occ = exact_occupancy(env, pi_star, t);
        const Mat& Q = ev.Q[static_cast<std::size_t>(t - 1)];
        Mat diff = pi_star.table(t) - pi.table(t);
        for (Eigen::Index x = 0; x < occ.size(); ++x) rhs += occ(x) * diff.row(x).dot(Q.row(x));
    }
    return std::abs((ev_star.value - ev.value) - rhs);
}

// ---------------------------------------------------------------------------
// Reachability diagnostics

double feature_coverage(const LowRankMdp& env, int h, int iters) {
    const FeatureMap& phi = env.phi();
    const int d = env.rank();
    Mat M = exact_second_moment(env, Policy::uniform(env, 1, h), phi, h);
    double best = lambda_min(M);
    for (int k = 0; k < iters; ++k) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()));
        const Vec lam = es.eigenvalues();
        const double beta = 20.0 + 2.0 * k;
        Vec w(d);
        for (int i = 0; i < d; ++i) w(i) = std::exp(-beta * (lam(i) - lam(0)));
        w /= w.sum();
        Mat G = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
        DpSolution sol = solve_single_layer(env, h, layer_reward(env, phi, h, [&](const Vec& v) { return v.dot(G * v); }));
        Mat S = exact_second_moment(env, sol.policy, phi, h);
        // lambda_min is concave along the segment, so golden section finds the max
        const double g = (std::sqrt(5.0) - 1.0) / 2.0;
        double lo = 0.0, hi = 1.0;
        auto f = [&](double s) { return lambda_min((1.0 - s) * M + s * S); };
        double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        double f1 = f(m1), f2 = f(m2);
        for (int it = 0; it < 60; ++it) {
            if (f1 < f2) {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + g * (hi - lo);
                f2 = f(m2);
            } else {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - g * (hi - lo);
                f1 = f(m1);
            }
        }
        double step = 0.5 * (lo + hi), val = f(step);
        if (f(1.0) > val) {
            step = 1.0;
            val = f(1.0);
        }
        if (val <= best) continue;
        M = (1.0 - step) * M + step * S;
        best = val;
    }
    return best;
}

double explorability_grid(const LowRankMdp& env, int h, const std::vector<Vec>& directions) {
    const FeatureMap& phi = env.phi();
    double out = std::numeric_limits<double>::infinity();
    for (const Vec& dir : directions) {
        double n = dir.norm();
        if (n == 0.0) continue;
        Vec theta = dir / n;
        double up = solve_single_layer(env, h, layer_reward(env, phi, h, [&](const Vec& v) { return theta.dot(v); })).value;
        double down =
            solve_single_layer(env, h, layer_reward(env, phi, h, [&](const Vec& v) { return -theta.dot(v); })).value;
        out = std::min(out, std::max(up, down));
    }
    return out;
}

ReachabilityDiagnostics reachability_diagnostics(const LowRankMdp& env, const DiagnosticsOptions& opt) {
    const int d = env.rank();
    Rng rng(opt.seed);
    ReachabilityDiagnostics out;
    out.eta_reach = out.eta_coverage = out.eta_explore_grid = out.eta_explore_lower =
        std::numeric_limits<double>::infinity();
    out.implications_hold = true;
    for (int h = 1; h < env.horizon(); ++h) {
        LayerDiagnostics L;
        L.h = h;
        L.reach = reachability_eta(env, h + 1, opt.budget);
        L.coverage = feature_coverage(env, h, opt.coverage_iters);

        std::vector<Vec> dirs;
        double covering = std::numeric_limits<double>::infinity();
        if (d == 1) {
            dirs.push_back(Vec::Ones(1));
            covering = 0.0;
        } else if (d == 2) {
            for (int k = 0; k < opt.grid; ++k) {
                double ang = std::numbers::pi * k / opt.grid;
                Vec v(2);
                v << std::cos(ang), std::sin(ang);
                dirs.push_back(v);
            }
            covering = 2.0 * std::sin(std::numbers::pi / opt.grid / 4.0);
        } else {
            for (int i = 0; i < d; ++i) dirs.push_back(Vec::Unit(d, i));
            for (int k = 0; k < opt.grid; ++k) {
                Vec v(d);
                for (int i = 0; i < d; ++i) v(i) = rng.normal();
                dirs.push_back(v);
            }
        }
        const Mat& mu = env.mu(h + 1);
        for (Eigen::Index x = 0; x < mu.rows(); ++x)
            if (mu.row(x).norm() > 0.0) dirs.push_back(mu.row(x).transpose());
        L.explore_grid = explorability_grid(env, h, dirs);
        double lip = env.phi().layer(h).rowwise().norm().maxCoeff();
        L.explore_lower = std::isfinite(covering) ? std::max(0.0, L.explore_grid - lip * covering) : 0.0;

        L.coverage_implication = L.reach >= std::pow(L.coverage / 2.0, 1.5) - opt.tol;
        L.explore_implication = L.reach >= L.explore_grid - opt.tol;
        out.implications_hold = out.implications_hold && L.coverage_implication && L.explore_implication;
        out.eta_reach = std::min(out.eta_reach, L.reach);
        out.eta_coverage = std::min(out.eta_coverage, L.coverage);
        out.eta_explore_grid = std::min(out.eta_explore_grid, L.explore_grid);
        out.eta_explore_lower = std::min(out.eta_explore_lower, L.explore_lower);
        out.layers.push_back(L);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Coverability

CoverabilityReport coverability(const LowRankMdp& env, int h, double C, double eps) {
    if (h < 1 || h >= env.horizon()) throw Error("coverability: layer h+1 must exist");
    const FeatureMap& phi = env.phi();
    const int d = env.rank();
    SpannerOracles<Policy> oracles;
    oracles.dim = d;
    oracles.lin_opt = [&](const Vec& theta) {
        return solve_single_layer(env, h, layer_reward(env, phi, h, [&](const Vec& v) { return theta.dot(v); })).policy;
    };
    oracles.lin_est = [&](const Policy& pi) { return exact_feature_expectation(env, pi, phi, h); };
    SpannerOptions so;
    so.C = C;
    so.eps = eps;
    SpannerResult<Policy> sp = robust_spanner(oracles, so);

    CoverabilityReport rep;
    rep.h = h;
    rep.spanner = sp.indices;
    rep.rho = Vec::Zero(env.num_states(h + 1));
    for (const auto& pi : rep.spanner) rep.rho += exact_occupancy(env, pi, h + 1) / d;
    Vec best = max_occupancy(env, h + 1);
    for (Eigen::Index x = 0; x < best.size(); ++x) {
        if (best(x) <= 1e-15) continue;
        rep.ratio = std::max(rep.ratio, rep.rho(x) > 0.0 ? best(x) / rep.rho(x) : std::numeric_limits<double>::infinity());
    }
    return rep;
}

}  // namespace voxlab
