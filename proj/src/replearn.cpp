#include "voxlab/replearn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "voxlab/simenv.hpp"

namespace voxlab {

double RepLearnConfig::big_radius(int d) const { return r_big > 0.0 ? r_big : 3.0 * std::pow(d, 1.5); }
double RepLearnConfig::small_radius(int d) const { return r_small > 0.0 ? r_small : 2.0 * std::sqrt(d); }

long replearn_iteration_cap(int d, std::size_t n) {
    if (d < 1 || n == 0) throw Error("replearn_iteration_cap: need d >= 1 and n >= 1");
    double v = d * std::log(2.0 * static_cast<double>(n) / std::sqrt(d)) / std::log(1.5);
    return std::max<long>(1, static_cast<long>(std::ceil(v - 1e-12)));
}

double replearn_eps_stat_sq(double c, int d, std::size_t num_features, double delta, std::size_t n) {
    if (n == 0) throw Error("replearn_eps_stat_sq: n must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("replearn_eps_stat_sq: delta must be in (0, 1)");
    return c * d * d * std::log(static_cast<double>(num_features) / delta) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Dataset

RepLearnDataset RepLearnDataset::empty(const LowRankMdp& env, int h) {
    if (h < 1 || h + 1 > env.horizon()) throw Error("RepLearnDataset: layer h+1 must exist");
    RepLearnDataset d;
    d.layer = h;
    d.num_actions = env.num_actions();
    const Eigen::Index rows = static_cast<Eigen::Index>(env.num_states(h)) * env.num_actions();
    d.counts = Mat::Zero(rows, env.num_states(h + 1));
    d.pair_counts = Vec::Zero(rows);
    d.next_counts = Vec::Zero(env.num_states(h + 1));
    return d;
}

void RepLearnDataset::add(int x, int a, int x_next) {
    const Eigen::Index r = static_cast<Eigen::Index>(x) * num_actions + a;
    counts(r, x_next) += 1.0;
    pair_counts(r) += 1.0;
    next_counts(x_next) += 1.0;
    ++n;
}

Vec RepLearnDataset::action_counts() const {
    Vec out = Vec::Zero(num_actions);
    for (Eigen::Index r = 0; r < pair_counts.size(); ++r) out(r % num_actions) += pair_counts(r);
    return out;
}

RepLearnDataset collect_replearn_data(const LowRankMdp& env, int h, const PolicyDistribution& P, std::size_t n,
                                      Rng& rng, EpisodeCounter* counter) {
    if (n == 0) throw Error("rep_learn: n must be >= 1");
    if (P.empty()) throw Error("rep_learn: empty policy distribution");
    for (const auto& e : P.entries())
        if (h > 1 && !e.policy->covers_range(1, h - 1))
            throw Error("rep_learn: policy does not cover layers [1.." + std::to_string(h - 1) + "]");
    RepLearnDataset data = RepLearnDataset::empty(env, h);
    const int A = env.num_actions();
    const std::size_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
    std::vector<std::vector<std::array<int, 3>>> partial(blocks);
    for_each_block(n, kSampleBlock, rng, [&](std::size_t b, std::size_t begin, std::size_t end, Rng& r) {
        auto& out = partial[b];
        out.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            const Policy& pi = P.sample(r);
            int x = roll_in(env, pi, h, r);
            int a = r.uniform_int(A);
            int x2 = sample_next_state(env, h, x, a, r);
            out.push_back({x, a, x2});
        }
    });
    for (const auto& block : partial)
        for (const auto& t : block) data.add(t[0], t[1], t[2]);
    count_episodes(counter, n);
    return data;
}

// ---------------------------------------------------------------------------
// Least-squares problems

RepLearnProblem::RepLearnProblem(const FeatureClass& features, const RepLearnDataset& data)
    : features_(&features), data_(&data) {
    if (features.size() == 0) throw Error("rep_learn: empty feature class");
    if (data.n == 0) throw Error("rep_learn: empty dataset");
    solvers_.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const Mat& table = features[i].layer(data.layer);
        solvers_.emplace_back(table.transpose() * data.pair_counts.asDiagonal() * table);
    }
}

Vec RepLearnProblem::discriminator_values(const Discriminator& f) const {
    return f.evaluate(*features_, data_->layer + 1);
}

BallLsResult RepLearnProblem::fit(std::size_t i, const Vec& f, double radius) const {
    const Mat& table = (*features_)[i].layer(data_->layer);
    Vec b = table.transpose() * (data_->counts * f);
    double c = data_->next_counts.dot(f.cwiseProduct(f));
    return solvers_[i].solve(b, c, data_->n, radius);
}

Vec RepLearnProblem::loss_gradient(std::size_t i, const Vec& f, const Vec& w) const {
    const Mat& table = (*features_)[i].layer(data_->layer);
    Vec pred = table * w;
    Vec g = 2.0 * (data_->next_counts.cwiseProduct(f) - data_->counts.transpose() * pred);
    return g / static_cast<double>(data_->n);
}

namespace {

GapValue gap_of_values(const RepLearnProblem& prob, std::size_t current, const Vec& f, double r_big, double r_small,
                       Vec* w_current = nullptr, Vec* w_competitor = nullptr) {
    GapValue g;
    BallLsResult cur = prob.fit(current, f, r_big);
    g.candidate_loss = cur.loss;
    g.competitor_loss = std::numeric_limits<double>::infinity();
    BallLsResult best;
    for (std::size_t i = 0; i < prob.features().size(); ++i) {
        BallLsResult r = prob.fit(i, f, r_small);
        if (r.loss < g.competitor_loss) {
            g.competitor_loss = r.loss;
            g.competitor = i;
            best = std::move(r);
        }
    }
    g.gap = g.candidate_loss - g.competitor_loss;
    if (w_current) *w_current = cur.w;
    if (w_competitor) *w_competitor = best.w;
    return g;
}

// Rows of phi_f at layer h+1 achieving max_a theta^T phi_f(x, a).
Mat active_rows(const FeatureMap& phi, int layer, const Vec& theta) {
    const Mat& table = phi.layer(layer);
    const int A = phi.num_actions();
    const Eigen::Index nx = table.rows() / A;
    Vec scores = table * theta;
    Mat out(nx, table.cols());
    for (Eigen::Index x = 0; x < nx; ++x) {
        Eigen::Index best = 0;
        scores.segment(x * A, A).maxCoeff(&best);
        out.row(x) = table.row(x * A + best);
    }
    return out;
}

Vec project_ball(Vec v) {
    double nv = v.norm();
    if (nv > 1.0) v /= nv;
    return v;
}

}  // namespace

GapValue adversarial_gap(const RepLearnProblem& prob, std::size_t current, const Discriminator& f,
                         const RepLearnConfig& config) {
    const int d = prob.features()[current].dim();
    return gap_of_values(prob, current, prob.discriminator_values(f), config.big_radius(d), config.small_radius(d));
}

double adversarial_gap(const FeatureClass& features, std::size_t current, const Discriminator& f,
                       const RepLearnDataset& data, const RepLearnConfig& config) {
    RepLearnProblem prob(features, data);
    return adversarial_gap(prob, current, f, config).gap;
}

DiscriminatorSearch discriminator_search(const RepLearnProblem& prob, std::size_t current,
                                         const RepLearnConfig& config, Rng& rng) {
    const FeatureClass& cls = prob.features();
    const int d = cls[current].dim();
    const int next_layer = prob.data().layer + 1;
    const double r_big = config.big_radius(d), r_small = config.small_radius(d);

    std::vector<Vec> seeds;
    for (int i = 0; i < d; ++i) {
        seeds.push_back(Vec::Unit(d, i));
        seeds.push_back(-Vec::Unit(d, i));
    }
    if (d > 1) {
        for (int k = 0; k < config.restarts; ++k) {
            Vec v(d);
            for (int i = 0; i < d; ++i) v(i) = rng.normal();
            double nv = v.norm();
            seeds.push_back(nv > 0.0 ? Vec(v / nv) : Vec(Vec::Unit(d, 0)));
        }
    }

    DiscriminatorSearch out;
    out.gap = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cls.size(); ++j) {
        auto value = [&](const Vec& theta) {
            return gap_of_values(prob, current, Discriminator{theta, j}.evaluate(cls, next_layer), r_big, r_small).gap;
        };
        for (const Vec& seed : seeds) {
            Vec theta = seed;
            double val = value(theta);
            out.seed_gaps.push_back(val);
            if (d > 1) {
                double step = config.step_size;
                for (int s = 0; s < config.steps && step > 1e-10; ++s) {
                    Vec f = Discriminator{theta, j}.evaluate(cls, next_layer);
                    Vec w_cur, w_comp;
                    GapValue g = gap_of_values(prob, current, f, r_big, r_small, &w_cur, &w_comp);
                    Vec df = prob.loss_gradient(current, f, w_cur) - prob.loss_gradient(g.competitor, f, w_comp);
                    Vec grad = active_rows(cls[j], next_layer, theta).transpose() * df;
                    if (grad.norm() < 1e-14) break;
                    bool moved = false;
                    while (step > 1e-10) {
                        Vec cand = project_ball(theta + step * grad);
                        double cv = value(cand);
                        if (cv > val) {
                            theta = cand;
                            val = cv;
                            moved = true;
                            step *= 1.5;
                            break;
                        }
                        step *= 0.5;
                    }
                    if (!moved) break;
                }
            }
            if (val > out.gap) {
                out.gap = val;
                out.best = Discriminator{theta, j};
            }
        }
    }
    return out;
}

std::size_t feature_selection(const RepLearnProblem& prob, const std::vector<Discriminator>& discriminators,
                              const RepLearnConfig& config, std::vector<double>* objective) {
    const FeatureClass& cls = prob.features();
    if (cls.size() == 0) throw Error("feature_selection: empty feature class");
    std::vector<Vec> values;
    for (const auto& f : discriminators) values.push_back(prob.discriminator_values(f));
    std::vector<double> obj(cls.size(), 0.0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const double r = config.small_radius(cls[i].dim());
        for (const auto& f : values) obj[i] += prob.fit(i, f, r).loss;
        if (obj[i] < obj[best]) best = i;
    }
    if (objective) *objective = std::move(obj);
    return best;
}

RepLearnResult rep_learn_on_data(const FeatureClass& features, const RepLearnDataset& data,
                                 const RepLearnConfig& config, Rng& rng) {
    if (features.size() == 0) throw Error("rep_learn: empty feature class");
    if (config.initial_index >= features.size()) throw Error("rep_learn: initial index out of range");
    RepLearnProblem prob(features, data);
    const int d = features[0].dim();
    const long cap = config.max_iters > 0 ? config.max_iters : replearn_iteration_cap(d, data.n);
    const double eps_sq = replearn_eps_stat_sq(config.c_stat, d, features.size(), config.delta, data.n);

    RepLearnResult res;
    res.index = config.initial_index;
    res.iterates.push_back(res.index);
    for (long t = 1; t <= cap; ++t) {
        DiscriminatorSearch s = discriminator_search(prob, res.index, config, rng);
        const double threshold = 16.0 * d * static_cast<double>(t) * eps_sq;
        res.iterations = t;
        res.gaps.push_back(s.gap);
        res.thresholds.push_back(threshold);
        res.discriminators.push_back(s.best);
        if (s.gap <= threshold) return res;
        res.index = feature_selection(prob, res.discriminators, config);
        res.iterates.push_back(res.index);
    }
    res.capped = true;
    return res;
}

RepLearnResult rep_learn(const LowRankMdp& env, int h, const FeatureClass& features, const PolicyDistribution& P,
                         std::size_t n, const RepLearnConfig& config, Rng& rng, EpisodeCounter* counter) {
    if (features.size() == 0) throw Error("rep_learn: empty feature class");
    if (h + 1 >= env.horizon()) throw Error("rep_learn: discriminators need features at layer h+1 < H");
    RepLearnDataset data = collect_replearn_data(env, h, P, n, rng, counter);
    return rep_learn_on_data(features, data, config, rng);
}

// ---------------------------------------------------------------------------
// Evaluation

Vec transfer_weights(const LowRankMdp& env, int h, const Vec& f) {
    const Mat& mu = env.mu(h + 1);
    if (f.size() != mu.rows()) throw Error("transfer_weights: f has the wrong length");
    return mu.transpose() * f;
}

Mat replearn_pair_distribution(const LowRankMdp& env, int h, const PolicyDistribution& P) {
    Vec occ = exact_occupancy(env, P, h);
    const int A = env.num_actions();
    Mat q(occ.size(), A);
    for (Eigen::Index x = 0; x < occ.size(); ++x) q.row(x).setConstant(occ(x) / A);
    return q;
}

double transfer_error(const LowRankMdp& env, int h, const FeatureMap& phi, const PolicyDistribution& P,
                      const FeatureClass& features, const std::vector<Discriminator>& discriminators, double radius) {
    const Mat q = replearn_pair_distribution(env, h, P);
    const int A = env.num_actions();
    const Mat& table = phi.layer(h);
    const Mat& star = env.phi().layer(h);
    Vec weights(table.rows());
    for (Eigen::Index x = 0; x < q.rows(); ++x)
        for (int a = 0; a < A; ++a) weights(x * A + a) = q(x, a);
    BallLeastSquares solver(table.transpose() * weights.asDiagonal() * table);
    double worst = 0.0;
    for (const auto& f : discriminators) {
        Vec wf = transfer_weights(env, h, f.evaluate(features, h + 1));
        Vec y = star * wf;
        Vec b = table.transpose() * weights.cwiseProduct(y);
        double c = weights.dot(y.cwiseProduct(y));
        worst = std::max(worst, solver.solve(b, c, 1, radius).loss);
    }
    return worst;
}

std::vector<Discriminator> discriminator_grid(const FeatureClass& features, int per_map, Rng& rng) {
    if (features.size() == 0) throw Error("discriminator_grid: empty feature class");
    const int d = features[0].dim();
    std::vector<Discriminator> out;
    for (std::size_t j = 0; j < features.size(); ++j) {
        for (int k = 0; k < per_map; ++k) {
            Vec theta(d);
            if (d == 1) {
                theta(0) = k % 2 == 0 ? 1.0 : -1.0;
            } else if (d == 2) {
                double ang = 2.0 * std::numbers::pi * k / per_map;
                theta << std::cos(ang), std::sin(ang);
            } else if (k < 2 * d) {
                theta = (k % 2 == 0 ? 1.0 : -1.0) * Vec::Unit(d, k / 2);
            } else {
                for (int i = 0; i < d; ++i) theta(i) = rng.normal();
                theta.normalize();
            }
            out.push_back(Discriminator{theta, j});
        }
    }
    return out;
}

}  // namespace voxlab
