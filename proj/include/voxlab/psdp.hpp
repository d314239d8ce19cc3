#pragma once

// Policy Search by Dynamic Programming: backward per-layer regression of
// Q-functions over a finite feature class and greedy policy extraction.

#include <cstddef>
#include <limits>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/estimators.hpp"
#include "voxlab/rng.hpp"
#include "voxlab/simenv.hpp"

namespace voxlab {

/// Reward r_t(x, a). Quadratic and linear rewards live on a single layer.
class RewardSpec {
public:
    enum class Kind { zero, quadratic, linear, table };

    static RewardSpec zero() { return RewardSpec(); }
    /// r_h(x, a) = phi_h(x, a)^T M phi_h(x, a); M must be PSD.
    static RewardSpec quadratic(Mat M, FeatureMap phi, int h);
    /// r_h(x, a) = phi_h(x, a)^T theta.
    static RewardSpec linear(Vec theta, FeatureMap phi, int h);
    /// tables[t-1] is |X_t| x A (empty = zero); values are clipped to
    /// [lower, upper] when regression targets are formed.
    static RewardSpec table(RewardTables tables, double lower = -std::numeric_limits<double>::infinity(),
                            double upper = std::numeric_limits<double>::infinity());

    Kind kind() const { return kind_; }
    double evaluate(int x, int a, int t) const;
    /// evaluate() clipped to the declared range.
    double clipped(int x, int a, int t) const;
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    /// Per-layer tables for layers 1..last (for exact evaluation).
    RewardTables tables(const LowRankMdp& env, int last) const;

private:
    Kind kind_ = Kind::zero;
    int layer_ = 0;
    Mat M_;
    Vec theta_;
    FeatureMap phi_;
    RewardTables tables_;
    double lower_ = -std::numeric_limits<double>::infinity();
    double upper_ = std::numeric_limits<double>::infinity();
};

/// G_t: either {phi^T w : phi in Phi, ||w|| <= radius} or the singleton {r_t}.
struct ValueClass {
    enum class Kind { linear, reward };
    Kind kind = Kind::linear;
    const FeatureClass* features = nullptr;  ///< not owned; must outlive use
    double radius = 1.0;

    static ValueClass linear(const FeatureClass& features, double radius);
    static ValueClass reward() { return ValueClass{Kind::reward, nullptr, 0.0}; }
};

/// Sufficient statistics of a regression dataset {(x_i, a_i, y_i)} at a layer:
/// per-pair visit counts and target sums, plus the sum of squared targets.
struct RegressionData {
    int layer = 0;
    Mat count;  ///< |X_t| x A
    Mat sum;    ///< |X_t| x A
    double sum_sq = 0.0;
    std::size_t n = 0;

    static RegressionData empty(const LowRankMdp& env, int layer);
    void add(int x, int a, double y);
    void merge(const RegressionData& other);
};

struct BallLsResult {
    Vec w;
    double loss = 0.0;  ///< mean squared error
    bool on_boundary = false;
};

/// Ball-constrained least squares for a fixed Gram matrix G, with the
/// eigendecomposition cached so that many right-hand sides are cheap.
class BallLeastSquares {
public:
    explicit BallLeastSquares(const Mat& G);
    /// argmin over ||w|| <= radius of w^T G w - 2 b^T w; loss = (. + c) / n.
    BallLsResult solve(const Vec& b, double c, std::size_t n, double radius) const;

private:
    Mat G_;
    Vec lam_;
    Mat V_;
    double tol_ = 0.0;
};

/// argmin over ||w|| <= r of w^T G w - 2 b^T w (G PSD). Exact: minimum-norm
/// unconstrained solution if it fits, otherwise bisection on the ridge
/// multiplier until ||w|| = r within 1e-10. loss = (w^T G w - 2 b^T w + c) / n.
BallLsResult ball_constrained_least_squares(const Mat& G, const Vec& b, double c, std::size_t n, double radius);
/// Row form: minimizes mean (z_i^T w - y_i)^2.
BallLsResult ball_constrained_least_squares(const Mat& Z, const Vec& y, double radius);

/// Normal equations of data against feature table phi_t.
void normal_equations(const RegressionData& data, const FeatureMap& phi, Mat& G, Vec& b);

struct FitResult {
    static constexpr std::size_t kReward = static_cast<std::size_t>(-1);
    std::size_t phi_index = kReward;  ///< kReward for the singleton class
    Vec w;
    double loss = 0.0;  ///< mean squared error
};

/// Least squares over the class: enumerates Phi, lowest index on ties. For
/// the singleton class, rewards supplies the function.
FitResult fit_value_class(const RegressionData& data, const ValueClass& cls, const RewardSpec* rewards = nullptr);

/// Greedy table argmax_a g(x, a) at layer t, lowest action on ties.
Mat greedy_table(const LowRankMdp& env, int t, const FitResult& fit, const ValueClass& cls, const RewardSpec* rewards);

struct PsdpResult {
    Policy policy;                ///< over [1..h]
    std::vector<FitResult> fits;  ///< index t-1
};

/// Runs PSDP for layers h..1. classes[t-1] and covers[t-1] give G_t and
/// P^(t); every policy in P^(t) must cover 1..t-1. Uses h * n episodes.
PsdpResult psdp(const LowRankMdp& env, int h, const RewardSpec& rewards, const std::vector<ValueClass>& classes,
                const std::vector<const PolicyDistribution*>& covers, std::size_t n, Rng& rng,
                EpisodeCounter* counter = nullptr);

}  // namespace voxlab
