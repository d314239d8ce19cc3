#include "voxlab/psdp.hpp"

#include <algorithm>
#include <cmath>

namespace voxlab {

// ---------------------------------------------------------------------------
// RewardSpec

RewardSpec RewardSpec::quadratic(Mat M, FeatureMap phi, int h) {
    if (M.rows() != phi.dim() || M.cols() != phi.dim()) throw Error("RewardSpec::quadratic: M has wrong shape");
    RewardSpec r;
    r.kind_ = Kind::quadratic;
    r.layer_ = h;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10) throw Error("RewardSpec::quadratic: M is not PSD");
    r.lower_ = 0.0;
    r.upper_ = std::max(0.0, es.eigenvalues().maxCoeff());
    r.M_ = std::move(M);
    r.phi_ = std::move(phi);
    return r;
}

RewardSpec RewardSpec::linear(Vec theta, FeatureMap phi, int h) {
    if (theta.size() != phi.dim()) throw Error("RewardSpec::linear: theta has wrong dimension");
    RewardSpec r;
    r.kind_ = Kind::linear;
    r.layer_ = h;
    r.upper_ = theta.norm();
    r.lower_ = -r.upper_;
    r.theta_ = std::move(theta);
    r.phi_ = std::move(phi);
    return r;
}

RewardSpec RewardSpec::table(RewardTables tables, double lower, double upper) {
    if (lower > upper) throw Error("RewardSpec::table: lower bound exceeds upper bound");
    RewardSpec r;
    r.kind_ = Kind::table;
    r.tables_ = std::move(tables);
    r.lower_ = lower;
    r.upper_ = upper;
    return r;
}

double RewardSpec::evaluate(int x, int a, int t) const {
    switch (kind_) {
        case Kind::zero:
            return 0.0;
        case Kind::quadratic: {
            if (t != layer_) return 0.0;
            auto v = phi_.at(t, x, a);
            return v * M_ * v.transpose();
        }
        case Kind::linear:
            if (t != layer_) return 0.0;
            return phi_.at(t, x, a).dot(theta_);
        case Kind::table: {
            if (t < 1 || t > static_cast<int>(tables_.size())) return 0.0;
            const Mat& m = tables_[static_cast<std::size_t>(t - 1)];
            return m.size() == 0 ? 0.0 : m(x, a);
        }
    }
    return 0.0;
}

double RewardSpec::clipped(int x, int a, int t) const { return std::clamp(evaluate(x, a, t), lower_, upper_); }

RewardTables RewardSpec::tables(const LowRankMdp& env, int last) const {
    RewardTables out;
    for (int t = 1; t <= last; ++t) {
        Mat m(env.num_states(t), env.num_actions());
        for (int x = 0; x < m.rows(); ++x)
            for (int a = 0; a < m.cols(); ++a) m(x, a) = evaluate(x, a, t);
        out.push_back(std::move(m));
    }
    return out;
}

ValueClass ValueClass::linear(const FeatureClass& features, double radius) {
    if (!(radius > 0.0)) throw Error("ValueClass: radius must be positive");
    if (features.size() == 0) throw Error("ValueClass: empty feature class");
    return ValueClass{Kind::linear, &features, radius};
}

// ---------------------------------------------------------------------------
// Regression

RegressionData RegressionData::empty(const LowRankMdp& env, int layer) {
    RegressionData d;
    d.layer = layer;
    d.count = Mat::Zero(env.num_states(layer), env.num_actions());
    d.sum = Mat::Zero(env.num_states(layer), env.num_actions());
    return d;
}

void RegressionData::add(int x, int a, double y) {
    count(x, a) += 1.0;
    sum(x, a) += y;
    sum_sq += y * y;
    ++n;
}

void RegressionData::merge(const RegressionData& other) {
    count += other.count;
    sum += other.sum;
    sum_sq += other.sum_sq;
    n += other.n;
}

BallLeastSquares::BallLeastSquares(const Mat& G) : G_(0.5 * (G + G.transpose())) {
    Eigen::SelfAdjointEigenSolver<Mat> es(G_);
    lam_ = es.eigenvalues();
    V_ = es.eigenvectors();
    tol_ = 1e-12 * std::max(1.0, lam_.cwiseAbs().maxCoeff());
}

BallLsResult BallLeastSquares::solve(const Vec& b, double c, std::size_t n, double radius) const {
    if (!(radius > 0.0)) throw Error("ball_constrained_least_squares: radius must be positive");
    const Eigen::Index d = b.size();
    const Vec beta = V_.transpose() * b;

    auto coefficients = [&](double ridge) {
        Vec coef(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            double l = std::max(lam_(i), 0.0) + ridge;
            coef(i) = (ridge == 0.0 && l <= tol_) ? 0.0 : beta(i) / l;
        }
        return coef;
    };

    BallLsResult res;
    Vec coef = coefficients(0.0);
    if (coef.norm() > radius) {
        res.on_boundary = true;
        double lo = 0.0, hi = std::max(b.norm() / radius, 1e-300);
        while (coefficients(hi).norm() > radius) hi *= 2.0;
        for (int it = 0; it < 500; ++it) {
            double mid = 0.5 * (lo + hi);
            double nm = coefficients(mid).norm();
            if (std::abs(nm - radius) <= 1e-12 * std::max(1.0, radius)) {
                hi = mid;
                break;
            }
            if (nm > radius)
                lo = mid;
            else
                hi = mid;
            if (hi - lo <= 1e-16 * hi) break;
        }
        coef = coefficients(hi);
        double nm = coef.norm();
        if (nm > radius) coef *= radius / nm;
    }
    res.w = V_ * coef;
    double quad = res.w.dot(G_ * res.w) - 2.0 * b.dot(res.w) + c;
    res.loss = std::max(quad, 0.0) / static_cast<double>(std::max<std::size_t>(n, 1));
    return res;
}

BallLsResult ball_constrained_least_squares(const Mat& G, const Vec& b, double c, std::size_t n, double radius) {
    return BallLeastSquares(G).solve(b, c, n, radius);
}

BallLsResult ball_constrained_least_squares(const Mat& Z, const Vec& y, double radius) {
    if (Z.rows() != y.size()) throw Error("ball_constrained_least_squares: row count mismatch");
    return ball_constrained_least_squares(Z.transpose() * Z, Z.transpose() * y, y.squaredNorm(),
                                          static_cast<std::size_t>(y.size()), radius);
}

void normal_equations(const RegressionData& data, const FeatureMap& phi, Mat& G, Vec& b) {
    const Mat& table = phi.layer(data.layer);
    const int A = phi.num_actions();
    Vec c(table.rows()), s(table.rows());
    for (Eigen::Index x = 0; x < data.count.rows(); ++x) {
        for (int a = 0; a < A; ++a) {
            c(x * A + a) = data.count(x, a);
            s(x * A + a) = data.sum(x, a);
        }
    }
    G = table.transpose() * c.asDiagonal() * table;
    b = table.transpose() * s;
}

FitResult fit_value_class(const RegressionData& data, const ValueClass& cls, const RewardSpec* rewards) {
    if (data.n == 0) throw Error("fit_value_class: empty dataset");
    FitResult best;
    if (cls.kind == ValueClass::Kind::reward) {
        if (!rewards) throw Error("fit_value_class: singleton class needs the reward function");
        double loss = data.sum_sq;
        for (Eigen::Index x = 0; x < data.count.rows(); ++x) {
            for (Eigen::Index a = 0; a < data.count.cols(); ++a) {
                double g = rewards->evaluate(static_cast<int>(x), static_cast<int>(a), data.layer);
                loss += data.count(x, a) * g * g - 2.0 * data.sum(x, a) * g;
            }
        }
        best.loss = std::max(loss, 0.0) / static_cast<double>(data.n);
        return best;
    }
    if (!cls.features || cls.features->size() == 0) throw Error("fit_value_class: empty feature class");
    best.loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cls.features->size(); ++i) {
        Mat G;
        Vec b;
        normal_equations(data, (*cls.features)[i], G, b);
        BallLsResult r = ball_constrained_least_squares(G, b, data.sum_sq, data.n, cls.radius);
        if (r.loss < best.loss) {
            best.loss = r.loss;
            best.phi_index = i;
            best.w = std::move(r.w);
        }
    }
    return best;
}

Mat greedy_table(const LowRankMdp& env, int t, const FitResult& fit, const ValueClass& cls, const RewardSpec* rewards) {
    const int nx = env.num_states(t), A = env.num_actions();
    Mat table = Mat::Zero(nx, A);
    Vec scores;
    if (cls.kind == ValueClass::Kind::linear) scores = (*cls.features)[fit.phi_index].layer(t) * fit.w;
    for (int x = 0; x < nx; ++x) {
        int best = 0;
        double best_v = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) {
            double v = cls.kind == ValueClass::Kind::linear ? scores(x * A + a) : rewards->evaluate(x, a, t);
            if (v > best_v) {
                best_v = v;
                best = a;
            }
        }
        table(x, best) = 1.0;
    }
    return table;
}

// ---------------------------------------------------------------------------

PsdpResult psdp(const LowRankMdp& env, int h, const RewardSpec& rewards, const std::vector<ValueClass>& classes,
                const std::vector<const PolicyDistribution*>& covers, std::size_t n, Rng& rng,
                EpisodeCounter* counter) {
    if (h < 1 || h > env.horizon()) throw Error("psdp: layer " + std::to_string(h) + " out of range");
    if (n == 0) throw Error("psdp: n must be >= 1");
    if (static_cast<int>(classes.size()) < h) throw Error("psdp: need a value class for every layer 1..h");
    if (static_cast<int>(covers.size()) < h) throw Error("psdp: need a cover for every layer 1..h");
    for (int t = 1; t <= h; ++t) {
        const PolicyDistribution* P = covers[static_cast<std::size_t>(t - 1)];
        if (!P || P->empty()) throw Error("psdp: empty cover at layer " + std::to_string(t));
        for (const auto& e : P->entries())
            if (!e.policy->covers_range(1, t - 1))
                throw Error("psdp: cover policy at layer " + std::to_string(t) + " does not reach it");
    }

    const int A = env.num_actions();
    std::vector<Mat> tables(static_cast<std::size_t>(h));
    std::vector<std::vector<int>> greedy(static_cast<std::size_t>(h));
    PsdpResult result;
    result.fits.resize(static_cast<std::size_t>(h));

    for (int t = h; t >= 1; --t) {
        const PolicyDistribution& P = *covers[static_cast<std::size_t>(t - 1)];
        const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
        std::vector<RegressionData> partial(blocks);
        for_each_block(n, kSampleBlock, rng, [&](std::size_t blk, std::size_t begin, std::size_t end, Rng& r) {
            RegressionData data = RegressionData::empty(env, t);
            for (std::size_t i = begin; i < end; ++i) {
                const Policy& pi = P.sample(r);
                int x = roll_in(env, pi, t, r);
                int a = r.uniform_int(A);
                const int x_t = x, a_t = a;
                double y = rewards.clipped(x, a, t);
                for (int l = t + 1; l <= h; ++l) {
                    x = sample_next_state(env, l - 1, x, a, r);
                    a = greedy[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(x)];
                    y += rewards.clipped(x, a, l);
                }
                data.add(x_t, a_t, y);
            }
            partial[blk] = std::move(data);
        });
        RegressionData data = RegressionData::empty(env, t);
        for (const auto& p : partial) data.merge(p);
        count_episodes(counter, n);

        const ValueClass& cls = classes[static_cast<std::size_t>(t - 1)];
        FitResult fit = fit_value_class(data, cls, &rewards);
        Mat table = greedy_table(env, t, fit, cls, &rewards);
        auto& g = greedy[static_cast<std::size_t>(t - 1)];
        g.resize(static_cast<std::size_t>(table.rows()));
        for (Eigen::Index x = 0; x < table.rows(); ++x) {
            Eigen::Index a;
            table.row(x).maxCoeff(&a);
            g[static_cast<std::size_t>(x)] = static_cast<int>(a);
        }
        tables[static_cast<std::size_t>(t - 1)] = std::move(table);
        result.fits[static_cast<std::size_t>(t - 1)] = std::move(fit);
    }
    result.policy = Policy(1, std::move(tables));
    return result;
}

}  // namespace voxlab
