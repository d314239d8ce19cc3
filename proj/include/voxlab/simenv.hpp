#pragma once

// Synthetic environments and exact (brute-force) oracles: occupancies,
// feature moments, dynamic programming, reachability and trajectory sampling.

#include <cstdint>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/rng.hpp"

namespace voxlab {

/// Parameters of the latent-variable generator.
struct EnvSpec {
    int H = 3;
    int A = 2;
    int d_latent = 2;
    std::vector<int> states;  ///< |X_h| for h = 1..H
    std::uint64_t seed = 0;
    /// If > 0, mixes every latent row with the uniform simplex point so that
    /// reachability_eta >= boost_eta on layers 2..H.
    double boost_eta = 0.0;
    /// Apply a random orthogonal rotation per layer (breaks nonnegativity).
    bool rotate = false;
    /// Dirichlet concentration of the latent rows and emission columns.
    double concentration = 0.5;
};

void check_env_spec(const EnvSpec& spec);

/// phi(x, a) = psi(. | x, a) on the simplex, mu(x') = (q(x' | z))_z.
LowRankMdp generate_low_rank_mdp(const EnvSpec& spec, Rng& rng);
inline LowRankMdp generate_low_rank_mdp(const EnvSpec& spec) {
    Rng rng(spec.seed);
    return generate_low_rank_mdp(spec, rng);
}

/// Tabular MDP written as a low-rank one: d = max layer size beyond layer 1,
/// phi_h(x, a) = T_h(. | x, a) padded with zeros, mu_h(x') = e_{x'}.
LowRankMdp generate_tabular_mdp(int H, int A, const std::vector<int>& states, Rng& rng,
                                double concentration = 0.5);

/// Rebuilds env with a new feature map / mu (same layers and rho).
LowRankMdp with_factorization(const LowRankMdp& env, FeatureMap phi, std::vector<Mat> mu);

// ---------------------------------------------------------------------------
// Exact occupancies and moments

/// d^pi over X_h; pi must cover layers 1..h-1.
Vec exact_occupancy(const LowRankMdp& env, const Policy& pi, int h);
/// d^pi over X_h x A as an |X_h| x A matrix; pi must cover 1..h.
Mat exact_state_action_occupancy(const LowRankMdp& env, const Policy& pi, int h);
Mat exact_state_action_occupancy(const LowRankMdp& env, const PolicyDistribution& P, int h);
Vec exact_occupancy(const LowRankMdp& env, const PolicyDistribution& P, int h);

/// E^pi[phi_h(x_h, a_h)].
Vec exact_feature_expectation(const LowRankMdp& env, const Policy& pi, const FeatureMap& phi, int h);
/// E^pi[phi_h phi_h^T].
Mat exact_second_moment(const LowRankMdp& env, const Policy& pi, const FeatureMap& phi, int h);
Mat exact_second_moment(const LowRankMdp& env, const PolicyDistribution& P, const FeatureMap& phi, int h);

/// Sum over x, a of occ(x, a) phi_h(x, a) and the matching second moment.
Vec feature_expectation_from_occupancy(const Mat& occ, const FeatureMap& phi, int h);
Mat second_moment_from_occupancy(const Mat& occ, const FeatureMap& phi, int h);

// ---------------------------------------------------------------------------
// Sampling

struct Trajectory {
    std::vector<int> states;  ///< local index of x_h, h = 1..H (index h-1)
    std::vector<int> actions;
    std::vector<double> rewards;
};

int sample_action(const Policy& pi, int h, int x, Rng& rng);
int sample_next_state(const LowRankMdp& env, int h, int x, int a, Rng& rng);
int sample_initial_state(const LowRankMdp& env, Rng& rng);

/// Samples x_1..x_h under pi (which must cover 1..h-1) and returns x_h.
int roll_in(const LowRankMdp& env, const Policy& pi, int h, Rng& rng);

/// Full episode; pi must cover 1..H. rewards[h-1] is an |X_h| x A table (or
/// empty for zero reward at that layer); pass nullptr for zero rewards.
Trajectory sample_trajectory(const LowRankMdp& env, const Policy& pi, const std::vector<Mat>* rewards, Rng& rng);

// ---------------------------------------------------------------------------
// Dynamic programming

/// Per-layer reward tables r_t (|X_t| x A); layers beyond the table count
/// carry zero reward. Empty tables mean zero.
using RewardTables = std::vector<Mat>;

struct DpSolution {
    double value = 0.0;             ///< sum_x rho(x) V_1(x)
    std::vector<Vec> V;             ///< V_t, t = 1..last
    std::vector<Mat> Q;             ///< Q_t, t = 1..last
    Policy policy;                  ///< greedy, lowest action on ties
};

/// Optimal values over Markov policies on layers 1..last.
DpSolution solve_dp(const LowRankMdp& env, const RewardTables& rewards, int last);

struct PolicyEvaluation {
    double value = 0.0;
    std::vector<Vec> V;
    std::vector<Mat> Q;
};

/// Q^pi and V^pi for layers 1..last (pi must cover 1..last).
PolicyEvaluation evaluate_policy(const LowRankMdp& env, const Policy& pi, const RewardTables& rewards, int last);

/// max over Markov policies of d^pi(x) for every x in X_h. Exact, via one
/// backward recursion per target state (vectorized over targets).
Vec max_occupancy(const LowRankMdp& env, int h);

/// Work units (state-action-next-state products) of max_occupancy(env, h).
double max_occupancy_cost(const LowRankMdp& env, int h);

/// eta_h = min over x with ||mu_h(x)|| > 0 of max_pi d^pi(x) / ||mu_h(x)||.
/// Throws when the DP cost exceeds budget.
double reachability_eta(const LowRankMdp& env, int h, double budget = 1e9);
/// Minimum of reachability_eta over h = 2..H.
double reachability_eta(const LowRankMdp& env, double budget = 1e9);

/// Number of deterministic policies on layers 1..last (as a double).
double count_deterministic_policies(const LowRankMdp& env, int last);
/// Every deterministic policy on layers 1..last; throws above limit.
std::vector<Policy> enumerate_deterministic_policies(const LowRankMdp& env, int last, double limit = 1e5);

/// Uniform distribution over every deterministic policy on layers 1..last
/// (the empty policy when last = 0).
PolicyDistribution uniform_over_deterministic(const LowRankMdp& env, int last, double limit = 1e5);

/// pi o_t unif: pi on layers 1..t-1, uniform at layer t.
Policy extend_with_uniform(const LowRankMdp& env, const Policy& pi, int t);
/// Applies extend_with_uniform to every support member, merging duplicates.
PolicyDistribution extend_with_uniform(const LowRankMdp& env, const PolicyDistribution& P, int t);

/// Random stochastic policy on layers [first..last].
Policy random_policy(const LowRankMdp& env, int first, int last, Rng& rng);
/// Random deterministic policy on layers [first..last].
Policy random_deterministic_policy(const LowRankMdp& env, int first, int last, Rng& rng);

/// Phi = {phi*} plus num_decoys decoys, alternating between phi* with its
/// (x, a) rows shuffled per layer and fresh random simplex features. The
/// members are shuffled; true_index locates phi*.
FeatureClass make_feature_class(const LowRankMdp& env, int num_decoys, Rng& rng);

/// Haar-random orthogonal matrix.
Mat random_orthogonal(int d, Rng& rng);

}  // namespace voxlab
