#include "voxlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "voxlab/rng.hpp"

namespace voxlab {

namespace {

std::string range_str(int lo, int hi) {
    std::ostringstream os;
    os << "[" << lo << ".." << hi << "]";
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureMap

FeatureMap::FeatureMap(int num_actions, std::vector<Mat> tables)
    : num_actions_(num_actions), tables_(std::move(tables)) {
    if (num_actions_ < 1) throw Error("FeatureMap: need at least one action");
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        if (tables_[i].rows() % num_actions_ != 0)
            throw Error("FeatureMap: layer " + std::to_string(i + 1) + " rows not a multiple of A");
        if (tables_[i].cols() != tables_.front().cols())
            throw Error("FeatureMap: inconsistent dimension across layers");
    }
}

const Mat& FeatureMap::layer(int h) const {
    if (h < 1 || h > num_layers())
        throw Error("FeatureMap: layer " + std::to_string(h) + " outside " + range_str(1, num_layers()));
    return tables_[static_cast<std::size_t>(h - 1)];
}

// ---------------------------------------------------------------------------
// LowRankMdp

LowRankMdp::LowRankMdp(int num_actions, std::vector<std::vector<long>> layer_state_ids, FeatureMap phi,
                       std::vector<Mat> mu, Vec rho)
    : num_actions_(num_actions),
      state_ids_(std::move(layer_state_ids)),
      phi_(std::move(phi)),
      mu_(std::move(mu)),
      rho_(std::move(rho)) {
    const int H = horizon();
    if (H < 2) throw Error("LowRankMdp: horizon must be at least 2");
    if (num_actions_ < 1) throw Error("LowRankMdp: need at least one action");
    if (phi_.num_actions() != num_actions_) throw Error("LowRankMdp: feature map action count mismatch");
    if (phi_.num_layers() != H - 1) throw Error("LowRankMdp: phi must have H-1 layers");
    if (static_cast<int>(mu_.size()) != H - 1) throw Error("LowRankMdp: mu must have H-1 layers");
    std::set<long> seen;
    for (int h = 1; h <= H; ++h) {
        const auto& ids = state_ids_[static_cast<std::size_t>(h - 1)];
        if (ids.empty()) throw Error("LowRankMdp: layer " + std::to_string(h) + " has no states");
        for (long id : ids)
            if (!seen.insert(id).second)
                throw Error("LowRankMdp: state id " + std::to_string(id) + " appears in more than one layer");
    }
    const int d = phi_.dim();
    for (int h = 1; h < H; ++h) {
        if (phi_.layer(h).rows() != static_cast<Eigen::Index>(num_states(h)) * num_actions_)
            throw Error("LowRankMdp: phi layer " + std::to_string(h) + " has wrong number of rows");
        const Mat& m = mu_[static_cast<std::size_t>(h - 1)];
        if (m.rows() != num_states(h + 1) || m.cols() != d)
            throw Error("LowRankMdp: mu layer " + std::to_string(h + 1) + " has wrong shape");
    }
    if (rho_.size() != num_states(1)) throw Error("LowRankMdp: rho size does not match layer 1");

    transition_.reserve(static_cast<std::size_t>(H - 1));
    transition_cdf_.reserve(static_cast<std::size_t>(H - 1));
    for (int h = 1; h < H; ++h) {
        Mat t = phi_.layer(h) * mu_[static_cast<std::size_t>(h - 1)].transpose();
        Mat cdf(t.rows(), t.cols());
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            double acc = 0.0;
            for (Eigen::Index c = 0; c < t.cols(); ++c) {
                acc += std::max(t(r, c), 0.0);
                cdf(r, c) = acc;
            }
            if (acc <= 0.0) {
                // degenerate row: fall back to uniform so sampling stays defined
                for (Eigen::Index c = 0; c < t.cols(); ++c) cdf(r, c) = static_cast<double>(c + 1);
            }
        }
        transition_.push_back(std::move(t));
        transition_cdf_.push_back(std::move(cdf));
    }
    rho_cdf_.resize(rho_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < rho_.size(); ++i) {
        acc += std::max(rho_(i), 0.0);
        rho_cdf_(i) = acc;
    }
}

void LowRankMdp::check_layer(int h) const {
    if (h < 1 || h > horizon())
        throw Error("layer " + std::to_string(h) + " outside " + range_str(1, horizon()));
}

int LowRankMdp::num_states(int h) const {
    check_layer(h);
    return static_cast<int>(state_ids_[static_cast<std::size_t>(h - 1)].size());
}

const std::vector<long>& LowRankMdp::state_ids(int h) const {
    check_layer(h);
    return state_ids_[static_cast<std::size_t>(h - 1)];
}

const Mat& LowRankMdp::mu(int h) const {
    if (h < 2 || h > horizon()) throw Error("mu: layer " + std::to_string(h) + " outside " + range_str(2, horizon()));
    return mu_[static_cast<std::size_t>(h - 2)];
}

const Mat& LowRankMdp::transition(int h) const {
    if (h < 1 || h >= horizon())
        throw Error("transition: layer " + std::to_string(h) + " outside " + range_str(1, horizon() - 1));
    return transition_[static_cast<std::size_t>(h - 1)];
}

const Mat& LowRankMdp::transition_cdf(int h) const {
    if (h < 1 || h >= horizon())
        throw Error("transition: layer " + std::to_string(h) + " outside " + range_str(1, horizon() - 1));
    return transition_cdf_[static_cast<std::size_t>(h - 1)];
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(int first_layer, std::vector<Mat> tables) : first_(first_layer), tables_(std::move(tables)) {
    if (first_ < 1) throw Error("Policy: first layer must be >= 1");
    for (std::size_t i = 0; i < tables_.size(); ++i) {
        const Mat& t = tables_[i];
        for (Eigen::Index x = 0; x < t.rows(); ++x) {
            double s = t.row(x).sum();
            if (std::abs(s - 1.0) > 1e-9 || t.row(x).minCoeff() < -1e-12)
                throw Error("Policy: row " + std::to_string(x) + " of layer " +
                            std::to_string(first_ + static_cast<int>(i)) + " is not a probability vector");
        }
    }
}

Policy Policy::uniform(const LowRankMdp& env, int first_layer, int last_layer) {
    std::vector<Mat> tables;
    const int A = env.num_actions();
    for (int h = first_layer; h <= last_layer; ++h)
        tables.push_back(Mat::Constant(env.num_states(h), A, 1.0 / A));
    return Policy(first_layer, std::move(tables));
}

Policy Policy::deterministic(int first_layer, const std::vector<std::vector<int>>& actions, int num_actions) {
    std::vector<Mat> tables;
    tables.reserve(actions.size());
    for (const auto& layer : actions) {
        Mat t = Mat::Zero(static_cast<Eigen::Index>(layer.size()), num_actions);
        for (std::size_t x = 0; x < layer.size(); ++x) {
            if (layer[x] < 0 || layer[x] >= num_actions) throw Error("Policy: action out of range");
            t(static_cast<Eigen::Index>(x), layer[x]) = 1.0;
        }
        tables.push_back(std::move(t));
    }
    return Policy(first_layer, std::move(tables));
}

const Mat& Policy::table(int h) const {
    if (!covers(h))
        throw Error("Policy over " + range_str(first_, last_layer()) + " has no layer " + std::to_string(h));
    return tables_[static_cast<std::size_t>(h - first_)];
}

Policy Policy::restrict(int last) const {
    if (last < first_ - 1 || last > last_layer())
        throw Error("Policy::restrict: " + std::to_string(last) + " outside " + range_str(first_ - 1, last_layer()));
    std::vector<Mat> t(tables_.begin(), tables_.begin() + (last - first_ + 1));
    return Policy(first_, std::move(t));
}

bool operator==(const Policy& lhs, const Policy& rhs) {
    if (lhs.first_ != rhs.first_ || lhs.tables_.size() != rhs.tables_.size()) return false;
    for (std::size_t i = 0; i < lhs.tables_.size(); ++i) {
        const Mat& a = lhs.tables_[i];
        const Mat& b = rhs.tables_[i];
        if (a.rows() != b.rows() || a.cols() != b.cols() || a != b) return false;
    }
    return true;
}

Policy compose_policies(const Policy& prefix, const Policy& suffix) {
    const int t = suffix.first_layer();
    if (prefix.first_layer() != 1 || prefix.last_layer() < t - 1)
        throw Error("compose_policies: prefix over " + range_str(prefix.first_layer(), prefix.last_layer()) +
                    " does not abut suffix over " + range_str(t, suffix.last_layer()));
    std::vector<Mat> tables;
    tables.reserve(static_cast<std::size_t>(suffix.last_layer()));
    for (int h = 1; h < t; ++h) tables.push_back(prefix.table(h));
    for (int h = t; h <= suffix.last_layer(); ++h) tables.push_back(suffix.table(h));
    return Policy(1, std::move(tables));
}

// ---------------------------------------------------------------------------
// PolicyDistribution

PolicyDistribution::PolicyDistribution(std::vector<Entry> entries) : entries_(std::move(entries)) {
    double total = 0.0;
    for (const auto& e : entries_) {
        if (!e.policy) throw Error("PolicyDistribution: null policy");
        if (!(e.weight >= 0.0)) throw Error("PolicyDistribution: negative weight");
        total += e.weight;
    }
    if (entries_.empty()) return;
    if (std::abs(total - 1.0) > 1e-9)
        throw Error("PolicyDistribution: weights sum to " + std::to_string(total) + ", expected 1");
    cdf_.reserve(entries_.size());
    double acc = 0.0;
    for (auto& e : entries_) {
        e.weight /= total;
        acc += e.weight;
        cdf_.push_back(acc);
    }
}

PolicyDistribution PolicyDistribution::point_mass(PolicyRef policy) {
    return PolicyDistribution({Entry{std::move(policy), 1.0}});
}

PolicyDistribution PolicyDistribution::uniform_over(const std::vector<PolicyRef>& policies) {
    if (policies.empty()) throw Error("PolicyDistribution::uniform_over: empty policy set");
    std::vector<Entry> entries;
    entries.reserve(policies.size());
    for (const auto& p : policies) entries.push_back({p, 1.0 / static_cast<double>(policies.size())});
    return PolicyDistribution(std::move(entries));
}

PolicyDistribution PolicyDistribution::mixture(const std::vector<std::pair<const PolicyDistribution*, double>>& parts) {
    std::vector<Entry> merged;
    for (const auto& [dist, w] : parts) {
        if (w < 0.0) throw Error("PolicyDistribution::mixture: negative weight");
        if (w == 0.0) continue;
        for (const auto& e : dist->entries()) {
            auto it = std::find_if(merged.begin(), merged.end(), [&](const Entry& m) {
                return m.policy == e.policy || *m.policy == *e.policy;
            });
            if (it == merged.end())
                merged.push_back({e.policy, w * e.weight});
            else
                it->weight += w * e.weight;
        }
    }
    return PolicyDistribution(std::move(merged));
}

double PolicyDistribution::total_weight() const {
    double s = 0.0;
    for (const auto& e : entries_) s += e.weight;
    return s;
}

const Policy& PolicyDistribution::sample(Rng& rng) const {
    if (entries_.empty()) throw Error("PolicyDistribution::sample: empty support");
    if (entries_.size() == 1) return *entries_.front().policy;
    return *entries_[rng.from_cdf(cdf_)].policy;
}

// ---------------------------------------------------------------------------
// Discriminator

Vec Discriminator::evaluate(const FeatureClass& features, int h) const {
    const FeatureMap& phi = features[phi_index];
    const Mat& table = phi.layer(h);
    const int A = phi.num_actions();
    const Eigen::Index nx = table.rows() / A;
    Vec scores = table * theta;
    Vec out(nx);
    for (Eigen::Index x = 0; x < nx; ++x) out(x) = scores.segment(x * A, A).maxCoeff();
    return out;
}

// ---------------------------------------------------------------------------
// validate_mdp

namespace {

// Exact sup over binary g of ||sum_x g(x) mu(x)|| by Gray-code enumeration.
double exact_binary_sup(const Mat& mu) {
    const auto n = static_cast<int>(mu.rows());
    Vec acc = Vec::Zero(mu.cols());
    double best = 0.0;
    std::uint64_t gray_prev = 0;
    for (std::uint64_t i = 1; i < (std::uint64_t{1} << n); ++i) {
        std::uint64_t gray = i ^ (i >> 1);
        std::uint64_t flipped = gray ^ gray_prev;
        int bit = __builtin_ctzll(flipped);
        if (gray & flipped)
            acc += mu.row(bit).transpose();
        else
            acc -= mu.row(bit).transpose();
        gray_prev = gray;
        best = std::max(best, acc.norm());
    }
    return best;
}

}  // namespace

ValidationReport validate_mdp(const LowRankMdp& env, std::uint64_t spot_check_seed) {
    ValidationReport report;
    const int H = env.horizon();
    const int A = env.num_actions();
    const int d = env.rank();
    auto add = [&](std::string kind, std::string msg, int h, int x = -1, int a = -1, int xn = -1) {
        report.violations.push_back({std::move(kind), std::move(msg), h, x, a, xn});
    };

    for (int h = 1; h < H; ++h) {
        for (int x = 0; x < env.num_states(h); ++x) {
            for (int a = 0; a < A; ++a) {
                double norm = env.phi().at(h, x, a).norm();
                if (norm > 1.0 + 1e-12) {
                    std::ostringstream os;
                    os << "||phi_" << h << "(" << x << "," << a << ")|| = " << norm << " > 1";
                    add("phi_norm", os.str(), h, x, a);
                }
                auto row = env.transition(h).row(static_cast<Eigen::Index>(x) * A + a);
                for (Eigen::Index xn = 0; xn < row.size(); ++xn) {
                    if (row(xn) < -1e-12) {
                        std::ostringstream os;
                        os << "T_" << h << "(" << xn << "|" << x << "," << a << ") = " << row(xn) << " < 0";
                        add("negative_transition", os.str(), h, x, a, static_cast<int>(xn));
                    }
                }
                double s = row.sum();
                if (std::abs(s - 1.0) > 1e-9) {
                    std::ostringstream os;
                    os << "transition row (" << h << "," << x << "," << a << ") sums to " << s;
                    add("transition_sum", os.str(), h, x, a);
                }
            }
        }
    }

    Rng rng(spot_check_seed);
    const double sqrt_d = std::sqrt(static_cast<double>(d));
    for (int h = 2; h <= H; ++h) {
        const Mat& mu = env.mu(h);
        // spot check on random binary g
        for (int trial = 0; trial < 1000; ++trial) {
            Vec acc = Vec::Zero(d);
            for (Eigen::Index x = 0; x < mu.rows(); ++x)
                if (rng.uniform() < 0.5) acc += mu.row(x).transpose();
            report.spot_check_max_norm = std::max(report.spot_check_max_norm, acc.norm());
        }
        Vec l1 = mu.cwiseAbs().colwise().sum().transpose();
        if (l1.maxCoeff() <= 1.0 + 1e-12) continue;
        if (mu.rows() <= 20) {
            double sup = exact_binary_sup(mu);
            if (sup > sqrt_d * (1.0 + 1e-12)) {
                std::ostringstream os;
                os << "sup_g ||sum g(x) mu_" << h << "(x)|| = " << sup << " > sqrt(d) = " << sqrt_d;
                add("mu_normalization", os.str(), h);
            }
        } else {
            Eigen::Index i = 0;
            l1.maxCoeff(&i);
            std::ostringstream os;
            os << "sum_x |mu_" << h << "(x)[" << i << "]| = " << l1(i)
               << " > 1 and the exact check is infeasible for " << mu.rows() << " states";
            add("mu_normalization", os.str(), h);
        }
    }

    const Vec& rho = env.rho();
    for (Eigen::Index x = 0; x < rho.size(); ++x)
        if (rho(x) < -1e-12) add("rho", "rho(" + std::to_string(x) + ") < 0", 1, static_cast<int>(x));
    if (std::abs(rho.sum() - 1.0) > 1e-9) add("rho", "rho sums to " + std::to_string(rho.sum()), 1);
    return report;
}

}  // namespace voxlab
