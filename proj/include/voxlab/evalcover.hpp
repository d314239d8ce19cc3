#pragma once

// Exact, sampling-free checks: policy covers, design certificates over
// policy-induced families, the performance-difference identity and
// reachability diagnostics.

#include <cstdint>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/simenv.hpp"

namespace voxlab {

enum class CoverKind {
    randomized,  ///< E_{pi ~ P}[d^pi(x)] against alpha max_pi d^pi(x)
    set,         ///< max over the support instead of the expectation
};

struct CoverWitness {
    int state = -1;
    double achieved = 0.0;
    double best = 0.0;
};

struct CoverReport {
    bool pass = true;
    /// min over qualifying states of achieved / best (infinity if none).
    double measured_alpha = 0.0;
    int qualifying = 0;
    std::vector<CoverWitness> witnesses;  ///< failing states
    Vec achieved;
    Vec best;
};

/// States qualify when max_pi d^pi(x) >= eps ||mu_h(x)|| and max_pi d^pi(x) > 0
/// (layer 1 uses ||mu|| = 1). Every policy in P must cover 1..h-1. slack is
/// the arithmetic tolerance on achieved >= alpha best.
CoverReport check_policy_cover(const LowRankMdp& env, const PolicyDistribution& P, int h, double alpha, double eps,
                               CoverKind kind = CoverKind::randomized, double budget = 1e9, double slack = 1e-9);

struct DesignCheck {
    double sup = 0.0;    ///< sup over Markov pi of Tr(M_P^{-1} E^pi[phi phi^T])
    double bound = 0.0;  ///< (1 + 3C/2) d
    bool pass = false;
    Policy argmax;       ///< deterministic maximizer over layers 1..h
};

/// M_P = gamma I + E_{pi ~ P}[phi_h phi_h^T]. The sup is a linear function of
/// the occupancy, so it is attained by a deterministic policy and computed
/// exactly by dynamic programming with reward phi^T M_P^{-1} phi.
DesignCheck check_design_on_policies(const LowRankMdp& env, const FeatureMap& phi, const PolicyDistribution& P,
                                     double gamma, double C, int h);

/// |LHS - RHS| of the performance-difference identity over layers 1..h with
/// exact Q^pi and d^{pi_star}.
double pdl_check(const LowRankMdp& env, const Policy& pi, const Policy& pi_star, const RewardTables& rewards, int h);

struct DiagnosticsOptions {
    /// Directions in the explorability grid (half circle when d = 2).
    int grid = 720;
    int coverage_iters = 300;
    double budget = 1e9;
    double tol = 1e-9;
    std::uint64_t seed = 0;
};

struct LayerDiagnostics {
    int h = 0;                   ///< features at h, states at h + 1
    double reach = 0.0;          ///< eta at layer h + 1
    double coverage = 0.0;       ///< achieved lambda_min (a lower bound on the sup)
    double explore_grid = 0.0;   ///< min over grid directions (upper bound on the inf)
    double explore_lower = 0.0;  ///< certified lower bound (0 when d > 2)
    bool coverage_implication = false;
    bool explore_implication = false;
};

struct ReachabilityDiagnostics {
    std::vector<LayerDiagnostics> layers;  ///< h = 1..H-1
    double eta_reach = 0.0;
    double eta_coverage = 0.0;
    double eta_explore_grid = 0.0;
    double eta_explore_lower = 0.0;
    bool implications_hold = false;
};

/// sup over Markov pi of lambda_min(E^pi[phi*_h phi*_h^T]), maximized by
/// Frank-Wolfe over policy mixtures with a DP oracle; returns the achieved
/// value.
double feature_coverage(const LowRankMdp& env, int h, int iters);

/// min over grid directions theta of sup_pi |theta^T E^pi[phi*_h]|. The grid
/// always contains mu_{h+1}(x) / ||mu_{h+1}(x)|| for every x.
double explorability_grid(const LowRankMdp& env, int h, const std::vector<Vec>& directions);

ReachabilityDiagnostics reachability_diagnostics(const LowRankMdp& env, const DiagnosticsOptions& opt = {});

struct CoverabilityReport {
    int h = 0;
    std::vector<Policy> spanner;  ///< deterministic policies over 1..h
    Vec rho;                      ///< (1/d) sum_i d^{pi_i} over X_{h+1}
    double ratio = 0.0;           ///< max_x max_pi d^pi(x) / rho(x)
};

/// Mixture of an approximate barycentric spanner of {E^pi[phi*_h]} computed
/// with exact DP oracles.
CoverabilityReport coverability(const LowRankMdp& env, int h, double C = 1.005, double eps = 1e-9);

/// DP over layers 1..h with reward r_h only.
DpSolution solve_single_layer(const LowRankMdp& env, int h, const Mat& reward);

}  // namespace voxlab
