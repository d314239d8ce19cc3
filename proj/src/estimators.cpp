#include "voxlab/estimators.hpp"

#include <cmath>
#include <vector>

#include "voxlab/simenv.hpp"

namespace voxlab {

Mat sample_state_action_counts(const LowRankMdp& env, int h, const PolicyDistribution& P, std::size_t n, Rng& rng,
                               EpisodeCounter* counter) {
    env.check_layer(h);
    if (n == 0) throw Error("estimator: n must be >= 1");
    if (P.empty()) throw Error("estimator: empty policy distribution");
    for (const auto& e : P.entries())
        if (!e.policy->covers_range(1, h))
            throw Error("estimator: policy does not cover layers [1.." + std::to_string(h) + "]");
    const int nx = env.num_states(h), A = env.num_actions();
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    std::vector<Mat> partial(blocks);
    for_each_block(n, kSampleBlock, rng, [&](std::size_t b, std::size_t begin, std::size_t end, Rng& r) {
        Mat c = Mat::Zero(nx, A);
        for (std::size_t i = begin; i < end; ++i) {
            const Policy& pi = P.sample(r);
            int x = roll_in(env, pi, h, r);
            int a = sample_action(pi, h, x, r);
            c(x, a) += 1.0;
        }
        partial[b] = std::move(c);
    });
    Mat counts = Mat::Zero(nx, A);
    for (const auto& c : partial) counts += c;  // integer-valued, so order is irrelevant
    count_episodes(counter, n);
    return counts;
}

Vec est_vec(const LowRankMdp& env, int h, const VecFeature& F, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter) {
    Mat counts = sample_state_action_counts(env, h, P, n, rng, counter);
    Vec out;
    for (Eigen::Index x = 0; x < counts.rows(); ++x) {
        for (Eigen::Index a = 0; a < counts.cols(); ++a) {
            if (counts(x, a) == 0.0) continue;
            Vec v = F(static_cast<int>(x), static_cast<int>(a));
            if (out.size() == 0) out = Vec::Zero(v.size());
            out += counts(x, a) * v;
        }
    }
    return out / static_cast<double>(n);
}

Vec est_vec(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter) {
    Mat counts = sample_state_action_counts(env, h, P, n, rng, counter);
    return feature_expectation_from_occupancy(counts / static_cast<double>(n), phi, h);
}

Mat est_mat(const LowRankMdp& env, int h, const MatFeature& F, const PolicyDistribution& P, std::size_t n, Rng& rng,
            EpisodeCounter* counter) {
    Mat counts = sample_state_action_counts(env, h, P, n, rng, counter);
    Mat out;
    for (Eigen::Index x = 0; x < counts.rows(); ++x) {
        for (Eigen::Index a = 0; a < counts.cols(); ++a) {
            if (counts(x, a) == 0.0) continue;
            Mat m = F(static_cast<int>(x), static_cast<int>(a));
            if (out.size() == 0) out = Mat::Zero(m.rows(), m.cols());
            out += counts(x, a) * m;
        }
    }
    out /= static_cast<double>(n);
    return 0.5 * (out + out.transpose());
}

Mat est_second_moment(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P, std::size_t n,
                      Rng& rng, EpisodeCounter* counter) {
    Mat counts = sample_state_action_counts(env, h, P, n, rng, counter);
    return second_moment_from_occupancy(counts / static_cast<double>(n), phi, h);
}

double estimator_tolerance(double c, double delta, std::size_t n) {
    return c * std::sqrt(std::log(1.0 / delta) / static_cast<double>(n));
}

}  // namespace voxlab
