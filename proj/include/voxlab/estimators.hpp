#pragma once

// Monte-Carlo moment estimators (EstVec / EstMat).

#include <cstdint>
#include <functional>

#include "voxlab/core.hpp"
#include "voxlab/rng.hpp"

namespace voxlab {

/// Running total of sampled episodes, threaded through every sampler.
struct EpisodeCounter {
    std::uint64_t count = 0;
    void add(std::uint64_t n) { count += n; }
};

inline void count_episodes(EpisodeCounter* c, std::uint64_t n) {
    if (c) c->add(n);
}

/// Episodes per independently seeded block in all batch samplers.
inline constexpr std::size_t kSampleBlock = 512;

/// Visit counts of (x_h, a_h) over n episodes: each draws pi ~ P, rolls in
/// to layer h and samples a_h ~ pi_h. Result is |X_h| x A.
Mat sample_state_action_counts(const LowRankMdp& env, int h, const PolicyDistribution& P, std::size_t n, Rng& rng,
                               EpisodeCounter* counter = nullptr);

using VecFeature = std::function<Vec(int x, int a)>;
using MatFeature = std::function<Mat(int x, int a)>;

/// Average of F(x_h, a_h) over n episodes.
Vec est_vec(const LowRankMdp& env, int h, const VecFeature& F, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter = nullptr);
Vec est_vec(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter = nullptr);

/// Average of F(x_h, a_h) over n episodes; F must be PSD-valued. The output
/// is symmetrized.
Mat est_mat(const LowRankMdp& env, int h, const MatFeature& F, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter = nullptr);
/// est_mat with F = phi phi^T.
Mat est_second_moment(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P, std::size_t n,
                      Rng& rng, EpisodeCounter* counter = nullptr);

/// c * sqrt(ln(1/delta) / n).
double estimator_tolerance(double c, double delta, std::size_t n);

}  // namespace voxlab
