#pragma once

// Minimax representation learning: alternate between an adversarial
// discriminator f(x) = max_a theta^T phi_f(x, a) that the current features
// fail to predict, and least-squares selection of the features that best
// predict all discriminators seen so far.

#include <cstddef>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/estimators.hpp"
#include "voxlab/psdp.hpp"
#include "voxlab/rng.hpp"

namespace voxlab {

struct RepLearnConfig {
    double c_stat = 1.0;
    double delta = 0.01;
    /// 0 selects the defaults 3 d^{3/2} and 2 sqrt(d).
    double r_big = 0.0;
    double r_small = 0.0;
    int restarts = 8;
    int steps = 100;
    double step_size = 0.5;
    /// 0 selects the iteration cap ceil(d log_{3/2}(2n / sqrt(d))).
    long max_iters = 0;
    std::size_t initial_index = 0;

    double big_radius(int d) const;
    double small_radius(int d) const;
};

/// ceil(d log_{3/2}(2 n / sqrt(d))), at least 1.
long replearn_iteration_cap(int d, std::size_t n);
/// eps_stat^2 = c d^2 ln(|Phi| / delta) / n.
double replearn_eps_stat_sq(double c, int d, std::size_t num_features, double delta, std::size_t n);

/// Counts of triples (x_h, a_h, x_{h+1}); rows are x * A + a.
struct RepLearnDataset {
    int layer = 0;
    int num_actions = 0;
    Mat counts;       ///< (|X_h| A) x |X_{h+1}|
    Vec pair_counts;  ///< row sums
    Vec next_counts;  ///< column sums
    std::size_t n = 0;

    static RepLearnDataset empty(const LowRankMdp& env, int h);
    void add(int x, int a, int x_next);
    /// Empirical action frequencies at layer h.
    Vec action_counts() const;
};

/// n triples: pi ~ P rolled in to x_h, a_h uniform, x_{h+1} ~ T_h. Every
/// policy in P must cover 1..h-1.
RepLearnDataset collect_replearn_data(const LowRankMdp& env, int h, const PolicyDistribution& P, std::size_t n,
                                      Rng& rng, EpisodeCounter* counter = nullptr);

/// Per-candidate least-squares problems on a fixed dataset, with cached
/// Gram eigendecompositions. Losses are mean squared errors.
class RepLearnProblem {
public:
    RepLearnProblem(const FeatureClass& features, const RepLearnDataset& data);

    const FeatureClass& features() const { return *features_; }
    const RepLearnDataset& data() const { return *data_; }
    /// f over X_{h+1}.
    Vec discriminator_values(const Discriminator& f) const;
    /// min over ||w|| <= radius of L_D(phi_i, w, f) / n.
    BallLsResult fit(std::size_t i, const Vec& f, double radius) const;
    /// d(loss)/d(f) at the fitted w.
    Vec loss_gradient(std::size_t i, const Vec& f, const Vec& w) const;

private:
    const FeatureClass* features_;
    const RepLearnDataset* data_;
    std::vector<BallLeastSquares> solvers_;
};

struct GapValue {
    double gap = 0.0;
    double candidate_loss = 0.0;
    double competitor_loss = 0.0;
    std::size_t competitor = 0;
};

GapValue adversarial_gap(const RepLearnProblem& prob, std::size_t current, const Discriminator& f,
                         const RepLearnConfig& config);
double adversarial_gap(const FeatureClass& features, std::size_t current, const Discriminator& f,
                       const RepLearnDataset& data, const RepLearnConfig& config);

struct DiscriminatorSearch {
    Discriminator best;
    double gap = 0.0;
    /// Gap at each seed direction before ascent.
    std::vector<double> seed_gaps;
};

/// Multi-start projected gradient ascent over theta in the unit ball for each
/// phi_f; seeds are +-e_i and config.restarts random unit vectors. For d = 1
/// only theta = +-1 are evaluated.
DiscriminatorSearch discriminator_search(const RepLearnProblem& prob, std::size_t current,
                                         const RepLearnConfig& config, Rng& rng);

/// argmin_phi sum_l min_{||w|| <= r_small} L_D(phi, w, f_l), lowest index on
/// ties. objective (if given) receives the per-candidate sums.
std::size_t feature_selection(const RepLearnProblem& prob, const std::vector<Discriminator>& discriminators,
                              const RepLearnConfig& config, std::vector<double>* objective = nullptr);

struct RepLearnResult {
    std::size_t index = 0;
    long iterations = 0;
    bool capped = false;
    std::vector<double> gaps;
    std::vector<double> thresholds;
    std::vector<std::size_t> iterates;  ///< phi^(1), phi^(2), ...
    std::vector<Discriminator> discriminators;
};

/// The iteration on an existing dataset.
RepLearnResult rep_learn_on_data(const FeatureClass& features, const RepLearnDataset& data,
                                 const RepLearnConfig& config, Rng& rng);
RepLearnResult rep_learn(const LowRankMdp& env, int h, const FeatureClass& features, const PolicyDistribution& P,
                         std::size_t n, const RepLearnConfig& config, Rng& rng, EpisodeCounter* counter = nullptr);

// Evaluation-only helpers below use the true mu and exact occupancies.

/// w_f = sum_{x'} f(x') mu_{h+1}(x').
Vec transfer_weights(const LowRankMdp& env, int h, const Vec& f);

/// (x, a) weights at layer h under pi ~ P then a uniform action.
Mat replearn_pair_distribution(const LowRankMdp& env, int h, const PolicyDistribution& P);

/// max over the given discriminators of
/// min_{||w|| <= radius} E[(w^T phi(x_h, a_h) - w_f^T phi*(x_h, a_h))^2].
double transfer_error(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P,
                      const FeatureClass& features, const std::vector<Discriminator>& discriminators, double radius);

/// per_map unit directions for every phi_f: evenly spaced angles when d = 2,
/// random otherwise (+-e_i first).
std::vector<Discriminator> discriminator_grid(const FeatureClass& features, int per_map, Rng& rng);

}  // namespace voxlab
