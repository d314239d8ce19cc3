#include "voxlab/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>

namespace voxlab {

namespace {

Vec dirichlet(int n, double alpha, Rng& rng) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    Vec v(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        v(i) = gamma(rng.engine());
        s += v(i);
    }
    if (s <= 0.0) {
        v.setZero();
        v(rng.uniform_int(n)) = 1.0;
        return v;
    }
    return v / s;
}

void require_cover(const Policy& pi, int lo, int hi, const char* what) {
    if (!pi.covers_range(lo, hi))
        throw Error(std::string(what) + ": policy over [" + std::to_string(pi.first_layer()) + ".." +
                    std::to_string(pi.last_layer()) + "] does not cover [" + std::to_string(lo) + ".." +
                    std::to_string(hi) + "]");
}

// T_t applied to a per-next-state table: rows (x, a), columns as in next.
Mat propagate(const LowRankMdp& env, int t, const Mat& next) { return env.transition(t) * next; }

// Reshape (|X|*A) x k to per-state maxima over actions; also records argmax.
Mat max_over_actions(const Mat& q, int A, std::vector<int>* argmax = nullptr) {
    const Eigen::Index nx = q.rows() / A;
    Mat out(nx, q.cols());
    if (argmax) argmax->assign(static_cast<std::size_t>(nx), 0);
    for (Eigen::Index x = 0; x < nx; ++x) {
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            double best = q(x * A, c);
            int arg = 0;
            for (int a = 1; a < A; ++a) {
                if (q(x * A + a, c) > best) {
                    best = q(x * A + a, c);
                    arg = a;
                }
            }
            out(x, c) = best;
            if (argmax && c == 0) (*argmax)[static_cast<std::size_t>(x)] = arg;
        }
    }
    return out;
}

double reward_at(const RewardTables& r, int t, int x, int a) {
    if (t < 1 || t > static_cast<int>(r.size())) return 0.0;
    const Mat& m = r[static_cast<std::size_t>(t - 1)];
    if (m.size() == 0) return 0.0;
    return m(x, a);
}

}  // namespace

void check_env_spec(const EnvSpec& spec) {
    if (spec.H < 2) throw Error("EnvSpec: H must be >= 2");
    if (spec.A < 1) throw Error("EnvSpec: A must be >= 1");
    if (spec.d_latent < 1) throw Error("EnvSpec: d_latent must be >= 1");
    if (static_cast<int>(spec.states.size()) != spec.H) throw Error("EnvSpec: need one state count per layer");
    for (int n : spec.states)
        if (n < 1) throw Error("EnvSpec: state counts must be >= 1");
    if (spec.boost_eta < 0.0) throw Error("EnvSpec: boost_eta must be >= 0");
    if (!(spec.concentration > 0.0)) throw Error("EnvSpec: concentration must be > 0");
}

Mat random_orthogonal(int d, Rng& rng) {
    Mat g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

LowRankMdp generate_low_rank_mdp(const EnvSpec& spec, Rng& rng) {
    check_env_spec(spec);
    const int H = spec.H, A = spec.A, d = spec.d_latent;
    std::vector<std::vector<long>> ids(static_cast<std::size_t>(H));
    long next_id = 0;
    for (int h = 0; h < H; ++h)
        for (int x = 0; x < spec.states[static_cast<std::size_t>(h)]; ++x) ids[static_cast<std::size_t>(h)].push_back(next_id++);

    // boosting psi by beta guarantees E^pi[phi] >= beta/d coordinatewise
    const double beta = std::min(1.0, d * spec.boost_eta);
    std::vector<Mat> phi_tables, mu_tables;
    for (int h = 1; h < H; ++h) {
        const int nx = spec.states[static_cast<std::size_t>(h - 1)];
        const int nn = spec.states[static_cast<std::size_t>(h)];
        Mat psi(nx * A, d);
        for (int r = 0; r < nx * A; ++r) {
            Vec row = dirichlet(d, spec.concentration, rng);
            psi.row(r) = ((1.0 - beta) * row + Vec::Constant(d, beta / d)).transpose();
        }
        Mat q(nn, d);
        for (int z = 0; z < d; ++z) q.col(z) = dirichlet(nn, spec.concentration, rng);
        if (spec.rotate) {
            Mat R = random_orthogonal(d, rng);
            psi = psi * R.transpose();
            q = q * R.transpose();
        }
        phi_tables.push_back(std::move(psi));
        mu_tables.push_back(std::move(q));
    }
    Vec rho = dirichlet(spec.states.front(), 1.0, rng);
    return LowRankMdp(A, std::move(ids), FeatureMap(A, std::move(phi_tables)), std::move(mu_tables), std::move(rho));
}

LowRankMdp generate_tabular_mdp(int H, int A, const std::vector<int>& states, Rng& rng, double concentration) {
    if (H < 2 || static_cast<int>(states.size()) != H) throw Error("generate_tabular_mdp: bad layer sizes");
    int d = 1;
    for (int h = 1; h < H; ++h) d = std::max(d, states[static_cast<std::size_t>(h)]);
    std::vector<std::vector<long>> ids(static_cast<std::size_t>(H));
    long next_id = 0;
    for (int h = 0; h < H; ++h)
        for (int x = 0; x < states[static_cast<std::size_t>(h)]; ++x) ids[static_cast<std::size_t>(h)].push_back(next_id++);
    std::vector<Mat> phi_tables, mu_tables;
    for (int h = 1; h < H; ++h) {
        const int nx = states[static_cast<std::size_t>(h - 1)];
        const int nn = states[static_cast<std::size_t>(h)];
        Mat phi = Mat::Zero(nx * A, d);
        for (int r = 0; r < nx * A; ++r) phi.row(r).head(nn) = dirichlet(nn, concentration, rng).transpose();
        Mat mu = Mat::Zero(nn, d);
        mu.leftCols(nn).setIdentity();
        phi_tables.push_back(std::move(phi));
        mu_tables.push_back(std::move(mu));
    }
    Vec rho = dirichlet(states.front(), 1.0, rng);
    return LowRankMdp(A, std::move(ids), FeatureMap(A, std::move(phi_tables)), std::move(mu_tables), std::move(rho));
}

LowRankMdp with_factorization(const LowRankMdp& env, FeatureMap phi, std::vector<Mat> mu) {
    std::vector<std::vector<long>> ids;
    for (int h = 1; h <= env.horizon(); ++h) ids.push_back(env.state_ids(h));
    return LowRankMdp(env.num_actions(), std::move(ids), std::move(phi), std::move(mu), env.rho());
}

// ---------------------------------------------------------------------------

Vec exact_occupancy(const LowRankMdp& env, const Policy& pi, int h) {
    env.check_layer(h);
    require_cover(pi, 1, h - 1, "exact_occupancy");
    const int A = env.num_actions();
    Vec d = env.rho();
    for (int t = 1; t < h; ++t) {
        const Mat& table = pi.table(t);
        Vec sa(d.size() * A);
        for (Eigen::Index x = 0; x < d.size(); ++x)
            for (int a = 0; a < A; ++a) sa(x * A + a) = d(x) * table(x, a);
        d = env.transition(t).transpose() * sa;
    }
    return d;
}

Mat exact_state_action_occupancy(const LowRankMdp& env, const Policy& pi, int h) {
    require_cover(pi, 1, h, "exact_state_action_occupancy");
    Vec d = exact_occupancy(env, pi, h);
    return d.asDiagonal() * pi.table(h);
}

Mat exact_state_action_occupancy(const LowRankMdp& env, const PolicyDistribution& P, int h) {
    if (P.empty()) throw Error("exact_state_action_occupancy: empty distribution");
    Mat out = Mat::Zero(env.num_states(h), env.num_actions());
    for (const auto& e : P.entries()) out += e.weight * exact_state_action_occupancy(env, *e.policy, h);
    return out;
}

Vec exact_occupancy(const LowRankMdp& env, const PolicyDistribution& P, int h) {
    if (P.empty()) throw Error("exact_occupancy: empty distribution");
    Vec out = Vec::Zero(env.num_states(h));
    for (const auto& e : P.entries()) out += e.weight * exact_occupancy(env, *e.policy, h);
    return out;
}

Vec feature_expectation_from_occupancy(const Mat& occ, const FeatureMap& phi, int h) {
    const Mat& table = phi.layer(h);
    const int A = phi.num_actions();
    Vec out = Vec::Zero(phi.dim());
    for (Eigen::Index x = 0; x < occ.rows(); ++x)
        for (int a = 0; a < A; ++a) out += occ(x, a) * table.row(x * A + a).transpose();
    return out;
}

Mat second_moment_from_occupancy(const Mat& occ, const FeatureMap& phi, int h) {
    const Mat& table = phi.layer(h);
    const int A = phi.num_actions();
    Vec w(table.rows());
    for (Eigen::Index x = 0; x < occ.rows(); ++x)
        for (int a = 0; a < A; ++a) w(x * A + a) = occ(x, a);
    Mat out = table.transpose() * w.asDiagonal() * table;
    return 0.5 * (out + out.transpose());
}

Vec exact_feature_expectation(const LowRankMdp& env, const Policy& pi, const FeatureMap& phi, int h) {
    return feature_expectation_from_occupancy(exact_state_action_occupancy(env, pi, h), phi, h);
}

Mat exact_second_moment(const LowRankMdp& env, const Policy& pi, const FeatureMap& phi, int h) {
    return second_moment_from_occupancy(exact_state_action_occupancy(env, pi, h), phi, h);
}

Mat exact_second_moment(const LowRankMdp& env, const PolicyDistribution& P, const FeatureMap& phi, int h) {
    return second_moment_from_occupancy(exact_state_action_occupancy(env, P, h), phi, h);
}

// ---------------------------------------------------------------------------

int sample_action(const Policy& pi, int h, int x, Rng& rng) {
    const Mat& t = pi.table(h);
    const int A = static_cast<int>(t.cols());
    double u = rng.uniform();
    int last = 0;
    for (int a = 0; a < A; ++a) {
        double p = t(x, a);
        if (p <= 0.0) continue;
        last = a;
        if (u < p) return a;
        u -= p;
    }
    return last;
}

int sample_next_state(const LowRankMdp& env, int h, int x, int a, Rng& rng) {
    const Mat& cdf = env.transition_cdf(h);
    const Eigen::Index r = static_cast<Eigen::Index>(x) * env.num_actions() + a;
    const Eigen::Index n = cdf.cols();
    double u = rng.uniform() * cdf(r, n - 1);
    for (Eigen::Index c = 0; c < n; ++c)
        if (u < cdf(r, c)) return static_cast<int>(c);
    Eigen::Index c = n - 1;
    while (c > 0 && cdf(r, c) == cdf(r, c - 1)) --c;
    return static_cast<int>(c);
}

int sample_initial_state(const LowRankMdp& env, Rng& rng) {
    const Vec& cdf = env.rho_cdf();
    return static_cast<int>(rng.from_cdf(std::span<const double>(cdf.data(), static_cast<std::size_t>(cdf.size()))));
}

int roll_in(const LowRankMdp& env, const Policy& pi, int h, Rng& rng) {
    int x = sample_initial_state(env, rng);
    for (int t = 1; t < h; ++t) {
        int a = sample_action(pi, t, x, rng);
        x = sample_next_state(env, t, x, a, rng);
    }
    return x;
}

Trajectory sample_trajectory(const LowRankMdp& env, const Policy& pi, const std::vector<Mat>* rewards, Rng& rng) {
    const int H = env.horizon();
    require_cover(pi, 1, H, "sample_trajectory");
    Trajectory tr;
    tr.states.reserve(static_cast<std::size_t>(H));
    int x = sample_initial_state(env, rng);
    for (int h = 1; h <= H; ++h) {
        int a = sample_action(pi, h, x, rng);
        tr.states.push_back(x);
        tr.actions.push_back(a);
        tr.rewards.push_back(rewards ? reward_at(*rewards, h, x, a) : 0.0);
        if (h < H) x = sample_next_state(env, h, x, a, rng);
    }
    return tr;
}

// ---------------------------------------------------------------------------

DpSolution solve_dp(const LowRankMdp& env, const RewardTables& rewards, int last) {
    env.check_layer(last);
    const int A = env.num_actions();
    DpSolution sol;
    sol.V.resize(static_cast<std::size_t>(last));
    sol.Q.resize(static_cast<std::size_t>(last));
    std::vector<std::vector<int>> actions(static_cast<std::size_t>(last));
    Vec next;
    for (int t = last; t >= 1; --t) {
        const int nx = env.num_states(t);
        Mat q = Mat::Zero(nx, A);
        Vec cont;
        if (t < last) cont = env.transition(t) * next;
        for (int x = 0; x < nx; ++x)
            for (int a = 0; a < A; ++a)
                q(x, a) = reward_at(rewards, t, x, a) + (t < last ? cont(x * A + a) : 0.0);
        Vec v(nx);
        auto& act = actions[static_cast<std::size_t>(t - 1)];
        act.assign(static_cast<std::size_t>(nx), 0);
        for (int x = 0; x < nx; ++x) {
            int best = 0;
            for (int a = 1; a < A; ++a)
                if (q(x, a) > q(x, best)) best = a;
            act[static_cast<std::size_t>(x)] = best;
            v(x) = q(x, best);
        }
        sol.Q[static_cast<std::size_t>(t - 1)] = q;
        sol.V[static_cast<std::size_t>(t - 1)] = v;
        next = v;
    }
    sol.value = env.rho().dot(sol.V.front());
    sol.policy = Policy::deterministic(1, actions, A);
    return sol;
}

PolicyEvaluation evaluate_policy(const LowRankMdp& env, const Policy& pi, const RewardTables& rewards, int last) {
    env.check_layer(last);
    require_cover(pi, 1, last, "evaluate_policy");
    const int A = env.num_actions();
    PolicyEvaluation ev;
    ev.V.resize(static_cast<std::size_t>(last));
    ev.Q.resize(static_cast<std::size_t>(last));
    Vec next;
    for (int t = last; t >= 1; --t) {
        const int nx = env.num_states(t);
        Mat q = Mat::Zero(nx, A);
        Vec cont;
        if (t < last) cont = env.transition(t) * next;
        for (int x = 0; x < nx; ++x)
            for (int a = 0; a < A; ++a)
                q(x, a) = reward_at(rewards, t, x, a) + (t < last ? cont(x * A + a) : 0.0);
        Vec v = (q.cwiseProduct(pi.table(t))).rowwise().sum();
        ev.Q[static_cast<std::size_t>(t - 1)] = q;
        ev.V[static_cast<std::size_t>(t - 1)] = v;
        next = v;
    }
    ev.value = env.rho().dot(ev.V.front());
    return ev;
}

double max_occupancy_cost(const LowRankMdp& env, int h) {
    double cost = 0.0;
    for (int t = 1; t < h; ++t)
        cost += static_cast<double>(env.num_states(t)) * env.num_actions() * env.num_states(t + 1);
    return cost * env.num_states(h);
}

Vec max_occupancy(const LowRankMdp& env, int h) {
    env.check_layer(h);
    if (h == 1) return env.rho();
    const int A = env.num_actions();
    Mat V = Mat::Identity(env.num_states(h), env.num_states(h));
    for (int t = h - 1; t >= 1; --t) V = max_over_actions(propagate(env, t, V), A);
    return V.transpose() * env.rho();
}

double reachability_eta(const LowRankMdp& env, int h, double budget) {
    if (h < 2 || h > env.horizon()) throw Error("reachability_eta: layer must be in [2..H]");
    double cost = max_occupancy_cost(env, h);
    if (cost > budget)
        throw Error("reachability_eta: DP cost " + std::to_string(cost) + " exceeds budget " + std::to_string(budget));
    Vec occ = max_occupancy(env, h);
    const Mat& mu = env.mu(h);
    double eta = std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < mu.rows(); ++x) {
        double n = mu.row(x).norm();
        if (n > 0.0) eta = std::min(eta, occ(x) / n);
    }
    return eta;
}

double reachability_eta(const LowRankMdp& env, double budget) {
    double eta = std::numeric_limits<double>::infinity();
    for (int h = 2; h <= env.horizon(); ++h) eta = std::min(eta, reachability_eta(env, h, budget));
    return eta;
}

double count_deterministic_policies(const LowRankMdp& env, int last) {
    double count = 1.0;
    for (int t = 1; t <= last; ++t) count *= std::pow(static_cast<double>(env.num_actions()), env.num_states(t));
    return count;
}

std::vector<Policy> enumerate_deterministic_policies(const LowRankMdp& env, int last, double limit) {
    env.check_layer(last);
    double count = count_deterministic_policies(env, last);
    if (count > limit)
        throw Error("enumerate_deterministic_policies: " + std::to_string(count) + " policies exceed limit " +
                    std::to_string(limit));
    const int A = env.num_actions();
    std::vector<std::vector<int>> actions;
    for (int t = 1; t <= last; ++t) actions.emplace_back(static_cast<std::size_t>(env.num_states(t)), 0);
    std::vector<Policy> out;
    out.reserve(static_cast<std::size_t>(count));
    while (true) {
        out.push_back(Policy::deterministic(1, actions, A));
        // mixed-radix increment, layer 1 state 0 fastest
        bool carried = true;
        for (auto& layer : actions) {
            for (auto& a : layer) {
                if (++a < A) {
                    carried = false;
                    break;
                }
                a = 0;
            }
            if (!carried) break;
        }
        if (carried) break;
    }
    return out;
}

PolicyDistribution uniform_over_deterministic(const LowRankMdp& env, int last, double limit) {
    if (last == 0) return PolicyDistribution::point_mass(Policy::empty(1));
    std::vector<PolicyRef> refs;
    for (auto& p : enumerate_deterministic_policies(env, last, limit)) refs.push_back(make_policy_ref(std::move(p)));
    return PolicyDistribution::uniform_over(refs);
}

FeatureClass make_feature_class(const LowRankMdp& env, int num_decoys, Rng& rng) {
    const int A = env.num_actions(), d = env.rank();
    std::vector<FeatureMap> members{env.phi()};
    for (int k = 0; k < num_decoys; ++k) {
        std::vector<Mat> tables;
        for (int h = 1; h < env.horizon(); ++h) {
            const Mat& src = env.phi().layer(h);
            Mat t(src.rows(), d);
            if (k % 2 == 0) {
                std::vector<int> perm(static_cast<std::size_t>(src.rows()));
                for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
                std::shuffle(perm.begin(), perm.end(), rng.engine());
                for (Eigen::Index r = 0; r < src.rows(); ++r) t.row(r) = src.row(perm[static_cast<std::size_t>(r)]);
            } else {
                for (Eigen::Index r = 0; r < src.rows(); ++r) t.row(r) = dirichlet(d, 0.5, rng).transpose();
            }
            tables.push_back(std::move(t));
        }
        members.emplace_back(A, std::move(tables));
    }
    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng.engine());
    FeatureClass cls;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cls.candidates.push_back(members[order[i]]);
        if (order[i] == 0) cls.true_index = i;
    }
    return cls;
}

Policy extend_with_uniform(const LowRankMdp& env, const Policy& pi, int t) {
    env.check_layer(t);
    return compose_policies(pi.restrict(t - 1), Policy::uniform(env, t, t));
}

PolicyDistribution extend_with_uniform(const LowRankMdp& env, const PolicyDistribution& P, int t) {
    std::vector<PolicyDistribution::Entry> entries;
    for (const auto& e : P.entries()) entries.push_back({make_policy_ref(extend_with_uniform(env, *e.policy, t)), e.weight});
    PolicyDistribution raw(std::move(entries));
    // members that differ only on layers >= t become identical
    return PolicyDistribution::mixture({{&raw, 1.0}});
}

Policy random_policy(const LowRankMdp& env, int first, int last, Rng& rng) {
    std::vector<Mat> tables;
    for (int t = first; t <= last; ++t) {
        Mat m(env.num_states(t), env.num_actions());
        for (Eigen::Index x = 0; x < m.rows(); ++x) m.row(x) = dirichlet(env.num_actions(), 1.0, rng).transpose();
        tables.push_back(std::move(m));
    }
    return Policy(first, std::move(tables));
}

Policy random_deterministic_policy(const LowRankMdp& env, int first, int last, Rng& rng) {
    std::vector<std::vector<int>> actions;
    for (int t = first; t <= last; ++t) {
        std::vector<int> layer(static_cast<std::size_t>(env.num_states(t)));
        for (auto& a : layer) a = rng.uniform_int(env.num_actions());
        actions.push_back(std::move(layer));
    }
    return Policy::deterministic(first, actions, env.num_actions());
}

}  // namespace voxlab
