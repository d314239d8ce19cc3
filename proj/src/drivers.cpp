#include "voxlab/drivers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "voxlab/simenv.hpp"

namespace voxlab {

namespace {

std::uint64_t saturate(double v) {
    if (!(v < 1.8e19)) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(std::ceil(std::max(v, 1.0)));
}

std::size_t as_size(std::uint64_t n, const char* what) {
    if (n > std::numeric_limits<std::size_t>::max()) throw Error(std::string(what) + " does not fit in memory");
    return static_cast<std::size_t>(n);
}

std::string stage(const char* algo, int h, long k) {
    std::string s = std::string(algo) + " (h=" + std::to_string(h);
    if (k > 0) s += ", k=" + std::to_string(k);
    return s + "): ";
}

RepLearnConfig replearn_config(RepLearnConfig cfg, double delta) {
    cfg.delta = delta;
    return cfg;
}

std::vector<PolicyDistribution> initial_covers(const LowRankMdp& env) {
    std::vector<PolicyDistribution> covers(static_cast<std::size_t>(env.horizon()));
    covers[0] = PolicyDistribution::point_mass(Policy::empty());
    if (env.horizon() >= 2) covers[1] = PolicyDistribution::point_mass(Policy::uniform(env, 1, 1));
    return covers;
}

std::vector<const PolicyDistribution*> cover_ptrs(const std::vector<PolicyDistribution>& covers, int h) {
    std::vector<const PolicyDistribution*> out;
    for (int t = 1; t <= h; ++t) out.push_back(&covers[static_cast<std::size_t>(t - 1)]);
    return out;
}

void check_features(const LowRankMdp& env, const FeatureClass& features) {
    if (features.size() == 0) throw Error("empty feature class");
    for (const auto& phi : features.candidates)
        if (phi.num_layers() < env.horizon() - 1 || phi.num_actions() != env.num_actions())
            throw Error("feature class does not match the environment");
}

}  // namespace

// ---------------------------------------------------------------------------
// Schedules

VoxSchedule VoxSchedule::paper(double eta, int d, int A, int H, std::size_t num_features, double c, double delta) {
    VoxSchedule s;
    s.mode = ScheduleMode::paper;
    s.eta = eta;
    s.c = c;
    s.delta = delta;
    const double lphi = std::log(static_cast<double>(num_features) / delta);
    s.K = static_cast<long>(std::ceil(c * std::pow(eta, -2) * std::pow(d, 5) * A - 1e-9));
    s.gamma = eta * eta * std::pow(d, -4) / 576.0;
    s.n_replearn = saturate(c * std::pow(eta, -5) * std::pow(d, 10) * A * A * lphi);
    s.n_estmat = saturate(c * std::pow(s.gamma, -4) * std::log(1.0 / delta));
    s.n_psdp = saturate(c / eta * std::pow(s.gamma, -2) * H * H * d * d * static_cast<double>(s.K) * A * A * (d + lphi));
    return s;
}

void VoxSchedule::validate() const {
    if (K < 1) throw Error("VoxSchedule: K must be >= 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("VoxSchedule: gamma must be in (0, 1)");
    if (n_replearn == 0 || n_estmat == 0 || n_psdp == 0) throw Error("VoxSchedule: sample sizes must be >= 1");
    if (!(c > 0.0 && eta > 0.0)) throw Error("VoxSchedule: c and eta must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("VoxSchedule: delta must be in (0, 1)");
    if (!(C > 1.0 && C <= 2.0)) throw Error("VoxSchedule: C must be in (1, 2]");
}

SpanRlSchedule SpanRlSchedule::paper(double eps, int d, int A, int H, std::size_t num_features, double c,
                                     double delta) {
    SpanRlSchedule s;
    s.mode = ScheduleMode::paper;
    s.eps = eps;
    s.c = c;
    s.delta = delta;
    const double lphi = std::log(static_cast<double>(num_features) / delta);
    s.n_replearn = saturate(c / (eps * eps) * A * A * d * lphi);
    s.n_estvec = saturate(c / (eps * eps) * std::log(1.0 / delta));
    s.n_psdp = saturate(c / (eps * eps) * A * A * std::pow(d, 3) * H * H * (d + lphi));
    return s;
}

void SpanRlSchedule::validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw Error("SpanRlSchedule: eps must be in (0, 1)");
    if (n_replearn == 0 || n_estvec == 0 || n_psdp == 0) throw Error("SpanRlSchedule: sample sizes must be >= 1");
    if (!(c > 0.0)) throw Error("SpanRlSchedule: c must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("SpanRlSchedule: delta must be in (0, 1)");
    if (!(C > 1.0)) throw Error("SpanRlSchedule: C must exceed 1");
}

// ---------------------------------------------------------------------------
// VoX

RunResult run_vox(const LowRankMdp& env, const FeatureClass& features, const VoxSchedule& schedule, Rng& rng) {
    schedule.validate();
    check_features(env, features);
    const int H = env.horizon();
    const int d = features[0].dim();
    const std::size_t n_rl = as_size(schedule.n_replearn, "n_replearn");
    const std::size_t n_est = as_size(schedule.n_estmat, "n_estmat");
    const std::size_t n_psdp = as_size(schedule.n_psdp, "n_psdp");
    const RepLearnConfig rl_cfg = replearn_config(schedule.replearn, schedule.delta);

    RunResult res;
    EpisodeCounter counter;
    std::vector<PolicyDistribution> covers = initial_covers(env);
    const ValueClass g0 = ValueClass::linear(features, std::sqrt(static_cast<double>(d)));

    for (int h = 1; h <= H - 2; ++h) {
        const PolicyDistribution& base = covers[static_cast<std::size_t>(h - 1)];
        PolicyDistribution tilde = base;
        std::vector<PolicyDistribution> designs;
        std::vector<ValueClass> classes(static_cast<std::size_t>(h), g0);
        classes.back() = ValueClass::reward();
        const auto ptrs = cover_ptrs(covers, h);

        for (long k = 1; k <= schedule.K; ++k) {
            try {
                RepLearnResult rl = rep_learn(env, h, features, tilde, n_rl, rl_cfg, rng, &counter);
                const FeatureMap& phi = features[rl.index];

                // FW indices point into a registry of distinct PSDP outputs;
                // each is estimated once.
                std::vector<Policy> registry;
                std::vector<Mat> estimates;
                long opt_calls = 0;
                DesignOracles<std::size_t> oracles;
                oracles.dim = d;
                oracles.lin_opt = [&](const Mat& M) {
                    ++opt_calls;
                    RewardSpec r = RewardSpec::quadratic(M, phi, h);
                    Policy pi = psdp(env, h, r, classes, ptrs, n_psdp, rng, &counter).policy;
                    for (std::size_t i = 0; i < registry.size(); ++i)
                        if (registry[i] == pi) return i;
                    registry.push_back(std::move(pi));
                    estimates.push_back(est_second_moment(env, h, phi, PolicyDistribution::point_mass(registry.back()),
                                                          n_est, rng, &counter));
                    return registry.size() - 1;
                };
                oracles.lin_est = [&](const Design<std::size_t>& P) {
                    Mat W = Mat::Zero(d, d);
                    for (const auto& [i, w] : P) W += w * estimates[i];
                    return W;
                };
                FwOptions opt;
                opt.C = schedule.C;
                opt.gamma = schedule.gamma;
                opt.step = schedule.fw_step;
                opt.max_iters = schedule.fw_max_iters;
                FwResult<std::size_t> fw = fw_optdesign(oracles, opt);

                std::vector<PolicyDistribution::Entry> entries;
                for (const auto& [i, w] : fw.design) entries.push_back({make_policy_ref(registry[i]), w});
                designs.emplace_back(std::move(entries));

                StageRecord rec;
                rec.h = h;
                rec.k = k;
                rec.feature_index = rl.index;
                rec.replearn_iterations = rl.iterations;
                rec.replearn_capped = rl.capped;
                rec.iterations = fw.iterations;
                rec.certificate = fw.log.back().certificate;
                rec.support = fw.design.size();
                rec.lin_opt_calls = opt_calls;
                rec.lin_est_calls = static_cast<long>(estimates.size());
                res.cover.stages.push_back(rec);
                res.fw.push_back({h, k, std::move(fw.log)});

                std::vector<std::pair<const PolicyDistribution*, double>> parts{{&base, 0.5}};
                for (const auto& D : designs) parts.emplace_back(&D, 0.5 / static_cast<double>(k));
                tilde = PolicyDistribution::mixture(parts);
            } catch (const Error& e) {
                throw Error(stage("run_vox", h, k) + e.what());
            }
        }

        std::vector<PolicyDistribution> extended;
        for (const auto& D : designs) extended.push_back(extend_with_uniform(env, D, h + 1));
        std::vector<std::pair<const PolicyDistribution*, double>> parts;
        for (const auto& D : extended) parts.emplace_back(&D, 1.0 / static_cast<double>(schedule.K));
        covers[static_cast<std::size_t>(h + 1)] = PolicyDistribution::mixture(parts);
    }

    res.cover.covers = std::move(covers);
    res.episodes = counter.count;
    return res;
}

// ---------------------------------------------------------------------------
// SpanRL

RunResult run_spanrl(const LowRankMdp& env, const FeatureClass& features, const SpanRlSchedule& schedule, Rng& rng) {
    schedule.validate();
    check_features(env, features);
    const int H = env.horizon();
    const int d = features[0].dim();
    const std::size_t n_rl = as_size(schedule.n_replearn, "n_replearn");
    const std::size_t n_est = as_size(schedule.n_estvec, "n_estvec");
    const std::size_t n_psdp = as_size(schedule.n_psdp, "n_psdp");
    const RepLearnConfig rl_cfg = replearn_config(schedule.replearn, schedule.delta);

    RunResult res;
    EpisodeCounter counter;
    std::vector<PolicyDistribution> covers = initial_covers(env);
    std::vector<std::vector<PolicyRef>> psi(static_cast<std::size_t>(H));
    if (H >= 2) psi[1] = {covers[1].entries().front().policy};
    const ValueClass g = ValueClass::linear(features, 2.0 * std::sqrt(static_cast<double>(d)));

    for (int h = 1; h <= H - 2; ++h) {
        try {
            RepLearnResult rl = rep_learn(env, h, features, covers[static_cast<std::size_t>(h - 1)], n_rl, rl_cfg, rng,
                                          &counter);
            const FeatureMap& phi = features[rl.index];
            const std::vector<ValueClass> classes(static_cast<std::size_t>(h), g);
            const auto ptrs = cover_ptrs(covers, h);

            long opt_calls = 0, est_calls = 0;
            SpannerOracles<Policy> oracles;
            oracles.dim = d;
            oracles.lin_opt = [&](const Vec& theta) {
                ++opt_calls;
                return psdp(env, h, RewardSpec::linear(theta, phi, h), classes, ptrs, n_psdp, rng, &counter).policy;
            };
            oracles.lin_est = [&](const Policy& pi) {
                ++est_calls;
                return est_vec(env, h, phi, PolicyDistribution::point_mass(pi), n_est, rng, &counter);
            };
            SpannerOptions so;
            so.C = schedule.C;
            so.eps = schedule.eps;
            SpannerResult<Policy> sp = robust_spanner(oracles, so);

            auto& next = psi[static_cast<std::size_t>(h + 1)];
            for (const auto& pi : sp.indices) next.push_back(make_policy_ref(extend_with_uniform(env, pi, h + 1)));
            covers[static_cast<std::size_t>(h + 1)] = PolicyDistribution::uniform_over(next);

            StageRecord rec;
            rec.h = h;
            rec.feature_index = rl.index;
            rec.replearn_iterations = rl.iterations;
            rec.replearn_capped = rl.capped;
            rec.iterations = sp.rounds;
            rec.support = sp.indices.size();
            rec.lin_opt_calls = opt_calls;
            rec.lin_est_calls = est_calls;
            res.cover.stages.push_back(rec);
        } catch (const Error& e) {
            throw Error(stage("run_spanrl", h, 0) + e.what());
        }
    }

    res.cover.covers = std::move(covers);
    res.cover.psi = std::move(psi);
    res.episodes = counter.count;
    return res;
}

// ---------------------------------------------------------------------------
// Downstream rewards

OptimizeResult optimize_reward(const LowRankMdp& env, const FeatureClass& features, const CoverSet& covers,
                               const std::vector<Vec>& theta, std::uint64_t n, Rng& rng) {
    check_features(env, features);
    const int H = env.horizon();
    const int last = H - 1;
    if (last < 1) throw Error("optimize_reward: need H >= 2");
    if (static_cast<int>(covers.covers.size()) < last) throw Error("optimize_reward: missing cover layer");
    for (int t = 1; t <= last; ++t)
        if (covers.covers[static_cast<std::size_t>(t - 1)].empty())
            throw Error("optimize_reward: missing cover layer " + std::to_string(t));
    if (static_cast<int>(theta.size()) < last) throw Error("optimize_reward: need theta_h for h = 1..H-1");
    if (static_cast<int>(theta.size()) > last && theta[static_cast<std::size_t>(H - 1)].norm() > 0.0)
        throw Error("optimize_reward: layer H has no features, so theta_H must be zero");

    const int d = env.rank();
    RewardTables tables;
    for (int t = 1; t <= last; ++t) {
        const Vec& th = theta[static_cast<std::size_t>(t - 1)];
        if (th.size() != d) throw Error("optimize_reward: theta has the wrong dimension");
        if (th.norm() > 1.0 + 1e-12) throw Error("optimize_reward: ||theta_h|| must be <= 1");
        Mat r(env.num_states(t), env.num_actions());
        for (int x = 0; x < r.rows(); ++x)
            for (int a = 0; a < r.cols(); ++a) r(x, a) = env.phi().at(t, x, a).dot(th);
        tables.push_back(std::move(r));
    }
    RewardSpec rewards = RewardSpec::table(tables, -1.0, 1.0);
    const std::vector<ValueClass> classes(static_cast<std::size_t>(last),
                                          ValueClass::linear(features, 2.0 * H * std::sqrt(static_cast<double>(d))));
    EpisodeCounter counter;
    PsdpResult pr = psdp(env, last, rewards, classes, cover_ptrs(covers.covers, last), as_size(n, "n"), rng, &counter);
    OptimizeResult out;
    out.value = evaluate_policy(env, pr.policy, tables, last).value;
    out.policy = std::move(pr.policy);
    out.episodes = counter.count;
    return out;
}

std::string fw_csv(const std::vector<FwTrace>& traces) {
    std::ostringstream os;
    os.precision(17);
    os << "iter,objective,certificate\n";
    long iter = 0;
    for (const auto& t : traces)
        for (const auto& e : t.log) os << ++iter << ',' << e.objective << ',' << e.certificate << '\n';
    return os.str();
}

}  // namespace voxlab
