#pragma once

// Domain types for finite layered low-rank MDPs.
//
// Layers are numbered 1..H throughout the public API. States are addressed by
// their local index inside a layer; the global ids from the serialized form
// are kept only for round-tripping.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace voxlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised on contract violations (bad ranges, empty supports, budgets).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-layer feature tables phi_h(x, a) for h = 1..H-1.
///
/// Layer h is stored as a (|X_h| * A) x d matrix whose row x * A + a holds
/// phi_h(x, a).
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int num_actions, std::vector<Mat> tables);

    int dim() const { return tables_.empty() ? 0 : static_cast<int>(tables_.front().cols()); }
    int num_actions() const { return num_actions_; }
    /// Number of layers with features (H - 1 for a full map).
    int num_layers() const { return static_cast<int>(tables_.size()); }

    const Mat& layer(int h) const;
    auto at(int h, int x, int a) const { return layer(h).row(static_cast<Eigen::Index>(x) * num_actions_ + a); }

    const std::vector<Mat>& tables() const { return tables_; }

private:
    int num_actions_ = 0;
    std::vector<Mat> tables_;
};

/// Finite layered MDP with transitions T_h(x'|x,a) = mu_{h+1}(x')^T phi_h(x,a).
///
/// Immutable after construction. The constructor only checks shapes; use
/// validate_mdp() for a full report. Transition matrices are precomputed.
class LowRankMdp {
public:
    LowRankMdp(int num_actions, std::vector<std::vector<long>> layer_state_ids, FeatureMap phi,
               std::vector<Mat> mu, Vec rho);

    int horizon() const { return static_cast<int>(state_ids_.size()); }
    int num_actions() const { return num_actions_; }
    int rank() const { return phi_.dim(); }
    int num_states(int h) const;

    const std::vector<long>& state_ids(int h) const;
    const FeatureMap& phi() const { return phi_; }
    /// mu_h for layers h = 2..H, shape |X_h| x d.
    const Mat& mu(int h) const;
    const Vec& rho() const { return rho_; }

    /// T_h as a (|X_h| * A) x |X_{h+1}| matrix, h = 1..H-1.
    const Mat& transition(int h) const;
    /// Row-wise cumulative sums of the clamped, renormalized transition rows.
    const Mat& transition_cdf(int h) const;
    const Vec& rho_cdf() const { return rho_cdf_; }

    void check_layer(int h) const;

private:
    int num_actions_;
    std::vector<std::vector<long>> state_ids_;
    FeatureMap phi_;
    std::vector<Mat> mu_;  // index h-2
    Vec rho_;
    std::vector<Mat> transition_;  // index h-1
    std::vector<Mat> transition_cdf_;
    Vec rho_cdf_;
};

/// Markov policy over the contiguous layer range [first..last].
///
/// Each layer holds an |X_h| x A row-stochastic table. A policy with
/// last == first - 1 is the empty policy.
class Policy {
public:
    Policy() = default;
    Policy(int first_layer, std::vector<Mat> tables);

    static Policy empty(int first_layer = 1) { return Policy(first_layer, {}); }
    static Policy uniform(const LowRankMdp& env, int first_layer, int last_layer);
    /// actions[i][x] is the action at state x of layer first_layer + i.
    static Policy deterministic(int first_layer, const std::vector<std::vector<int>>& actions, int num_actions);

    int first_layer() const { return first_; }
    int last_layer() const { return first_ + static_cast<int>(tables_.size()) - 1; }
    bool covers(int h) const { return h >= first_ && h <= last_layer(); }
    bool covers_range(int lo, int hi) const { return hi < lo || (covers(lo) && covers(hi)); }

    const Mat& table(int h) const;
    double prob(int h, int x, int a) const { return table(h)(x, a); }
    const std::vector<Mat>& tables() const { return tables_; }

    /// Restriction to [first..last] (last may be first - 1).
    Policy restrict(int last) const;

    friend bool operator==(const Policy& lhs, const Policy& rhs);

private:
    int first_ = 1;
    std::vector<Mat> tables_;
};

/// pi o_t pi': prefix on layers < t, suffix on [t..h]; t = suffix.first_layer().
///
/// The prefix must start at layer 1 and reach at least t - 1; layers of the
/// prefix at or beyond t are dropped.
Policy compose_policies(const Policy& prefix, const Policy& suffix);

using PolicyRef = std::shared_ptr<const Policy>;

inline PolicyRef make_policy_ref(Policy p) { return std::make_shared<const Policy>(std::move(p)); }

class Rng;

/// Finite mixture over policies with weights summing to one.
class PolicyDistribution {
public:
    struct Entry {
        PolicyRef policy;
        double weight;
    };

    PolicyDistribution() = default;
    /// Weights must be nonnegative and sum to 1 +- 1e-9; they are renormalized.
    explicit PolicyDistribution(std::vector<Entry> entries);

    static PolicyDistribution point_mass(PolicyRef policy);
    static PolicyDistribution point_mass(Policy policy) { return point_mass(make_policy_ref(std::move(policy))); }
    static PolicyDistribution uniform_over(const std::vector<PolicyRef>& policies);
    /// Weighted combination of distributions; merges identical policies.
    static PolicyDistribution mixture(const std::vector<std::pair<const PolicyDistribution*, double>>& parts);

    bool empty() const { return entries_.empty(); }
    std::size_t support_size() const { return entries_.size(); }
    const std::vector<Entry>& entries() const { return entries_; }
    double total_weight() const;

    /// Draws support member i with probability weight_i.
    const Policy& sample(Rng& rng) const;

private:
    std::vector<Entry> entries_;
    std::vector<double> cdf_;
};

/// Finite candidate class Phi; every member has the shape of the true map.
struct FeatureClass {
    std::vector<FeatureMap> candidates;
    std::optional<std::size_t> true_index;

    std::size_t size() const { return candidates.size(); }
    const FeatureMap& operator[](std::size_t i) const { return candidates.at(i); }
};

/// f(x) = max_a theta^T phi(x, a), phi = Phi[phi_index].
struct Discriminator {
    Vec theta;
    std::size_t phi_index = 0;

    /// Values of f on every state of layer h.
    Vec evaluate(const FeatureClass& features, int h) const;
};

/// One violated invariant, with coordinates (unused ones are -1).
struct Violation {
    std::string kind;
    std::string message;
    int layer = -1;
    int state = -1;
    int action = -1;
    int next_state = -1;
};

struct ValidationReport {
    std::vector<Violation> violations;
    /// Largest ||sum_x g(x) mu_h(x)|| observed over random binary g.
    double spot_check_max_norm = 0.0;

    bool ok() const { return violations.empty(); }
};

/// Checks norm bounds, transition nonnegativity and normalization, the mu
/// normalization condition and that rho is a distribution.
ValidationReport validate_mdp(const LowRankMdp& env, std::uint64_t spot_check_seed = 0);

}  // namespace voxlab
