#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "voxlab/drivers.hpp"
#include "voxlab/evalcover.hpp"

using namespace voxlab;
using namespace testing;

namespace {

LowRankMdp desk_env(std::uint64_t seed, int H = 4) {
    EnvSpec spec;
    spec.H = H;
    spec.A = 2;
    spec.d_latent = 2;
    spec.states = std::vector<int>(static_cast<std::size_t>(H), 4);
    spec.seed = seed;
    spec.boost_eta = 0.2;
    return generate_low_rank_mdp(spec);
}

VoxSchedule small_vox() {
    VoxSchedule s;
    s.K = 3;
    s.n_replearn = 4000;
    s.n_estmat = 4000;
    s.n_psdp = 1000;
    return s;
}

SpanRlSchedule small_spanrl() {
    SpanRlSchedule s;
    s.n_replearn = 4000;
    s.n_estvec = 4000;
    s.n_psdp = 1000;
    return s;
}

double weight_of(const PolicyDistribution& P, const Policy& pi) {
    double w = 0.0;
    for (const auto& e : P.entries())
        if (*e.policy == pi) w += e.weight;
    return w;
}

}  // namespace

TEST_CASE("paper schedules") {
    SUBCASE("VoX constants at eta = 0.1, d = 2, A = 2") {
        VoxSchedule s = VoxSchedule::paper(0.1, 2, 2, 4, 4);
        CHECK(s.mode == ScheduleMode::paper);
        CHECK(s.K == 6400);
        CHECK(s.gamma == doctest::Approx(0.01 / 16.0 / 576.0).epsilon(1e-12));
        CHECK(s.gamma == doctest::Approx(1.0851e-6).epsilon(1e-4));
        // 1e5 * 1024 * 4 * ln(400)
        CHECK(static_cast<double>(s.n_replearn) == doctest::Approx(1e5 * 1024 * 4 * std::log(400.0)).epsilon(1e-9));
        // gamma^-4 ln(100) overflows 2^64
        CHECK(s.n_estmat == std::numeric_limits<std::uint64_t>::max());
        CHECK(s.n_psdp == std::numeric_limits<std::uint64_t>::max());
        CHECK_NOTHROW(s.validate());
    }
    SUBCASE("SpanRL constants") {
        const double eps = SpanRlSchedule::paper_eps(0.1, 2);
        CHECK(eps == doctest::Approx(0.1 / (36.0 * std::pow(2.0, 2.5))));
        SpanRlSchedule s = SpanRlSchedule::paper(0.1, 2, 2, 3, 4);
        CHECK(static_cast<double>(s.n_replearn) == std::ceil(100.0 * 4 * 2 * std::log(400.0)));
        CHECK(static_cast<double>(s.n_estvec) == doctest::Approx(std::ceil(100.0 * std::log(100.0))));
        CHECK(static_cast<double>(s.n_psdp) ==
              doctest::Approx(std::ceil(100.0 * 4 * 8 * 9 * (2 + std::log(400.0)))));
    }
    SUBCASE("validation") {
        VoxSchedule v;
        v.K = 0;
        CHECK_THROWS_AS(v.validate(), Error);
        v = VoxSchedule{};
        v.gamma = 1.0;
        CHECK_THROWS_AS(v.validate(), Error);
        v = VoxSchedule{};
        v.n_psdp = 0;
        CHECK_THROWS_AS(v.validate(), Error);
        SpanRlSchedule s;
        s.eps = 0.0;
        CHECK_THROWS_AS(s.validate(), Error);
    }
}

TEST_CASE("H = 2 needs no exploration") {
    LowRankMdp env = two_layer_mdp();
    FeatureClass cls{{env.phi()}, 0};
    Rng rng(1);
    for (int algo = 0; algo < 2; ++algo) {
        RunResult r = algo == 0 ? run_vox(env, cls, small_vox(), rng) : run_spanrl(env, cls, small_spanrl(), rng);
        REQUIRE(r.cover.covers.size() == 2);
        CHECK_FALSE(r.cover.covers[0].entries()[0].policy->covers(1));
        CHECK(*r.cover.covers[1].entries()[0].policy == Policy::uniform(env, 1, 1));
        CHECK(r.cover.stages.empty());
        CHECK(r.episodes == 0);
    }
}

TEST_CASE("VoX bookkeeping") {
    LowRankMdp env = desk_env(3);
    Rng crng(3);
    FeatureClass cls = make_feature_class(env, 2, crng);
    VoxSchedule sch = small_vox();
    Rng rng(7);
    RunResult r = run_vox(env, cls, sch, rng);
    const int H = env.horizon();
    REQUIRE(r.cover.covers.size() == static_cast<std::size_t>(H));
    REQUIRE(r.cover.stages.size() == static_cast<std::size_t>((H - 2) * sch.K));
    CHECK(r.fw.size() == r.cover.stages.size());

    SUBCASE("episode accounting is exact") {
        std::uint64_t expected = 0;
        for (const auto& st : r.cover.stages) {
            expected += sch.n_replearn;
            expected += static_cast<std::uint64_t>(st.h) * sch.n_psdp * static_cast<std::uint64_t>(st.lin_opt_calls);
            expected += sch.n_estmat * static_cast<std::uint64_t>(st.lin_est_calls);
            CHECK(st.lin_opt_calls == st.iterations + 1);
            CHECK(st.lin_est_calls <= st.lin_opt_calls);
        }
        CHECK(r.episodes == expected);
    }
    SUBCASE("designs are certified and covers are well formed") {
        for (const auto& st : r.cover.stages) {
            CHECK(st.certificate <= (1.0 + sch.C) * 2 + 1e-12);
            CHECK(st.support >= 1);
            CHECK(st.support <= static_cast<std::size_t>(st.lin_opt_calls));
        }
        for (int h = 1; h <= H; ++h) {
            const auto& P = r.cover.covers[static_cast<std::size_t>(h - 1)];
            double total = 0.0;
            for (const auto& e : P.entries()) {
                total += e.weight;
                CHECK(e.policy->covers_range(1, h - 1));
                CHECK_FALSE(e.policy->covers(h));
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("fw_csv numbers rows consecutively") {
        std::string csv = fw_csv(r.fw);
        std::size_t rows = 0;
        for (const auto& t : r.fw) rows += t.log.size();
        CHECK(csv.rfind("iter,objective,certificate\n", 0) == 0);
        CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == rows + 1);
        CHECK(csv.find("\n" + std::to_string(rows) + ",") != std::string::npos);
    }
    SUBCASE("covers reach every state") {
        for (int h = 1; h <= H; ++h) {
            auto rep = check_policy_cover(env, r.cover.covers[static_cast<std::size_t>(h - 1)], h, 0.01, 0.0);
            CHECK(rep.pass);
        }
    }
}

TEST_CASE("VoX mixing weights") {
    // Rebuild the VoX update by hand: P~ = 1/2 P + (1/(2k)) sum_l P_l.
    LowRankMdp env = desk_env(4);
    Policy base = Policy::uniform(env, 1, 1);
    Policy a = Policy::uniform(env, 1, 2);
    Policy b = Policy::deterministic(1, {{0, 0, 0, 0}, {1, 1, 1, 1}}, 2);
    PolicyDistribution P = PolicyDistribution::point_mass(base);
    std::vector<PolicyDistribution> designs{PolicyDistribution({{make_policy_ref(a), 0.25}, {make_policy_ref(b), 0.75}}),
                                            PolicyDistribution::point_mass(b)};
    std::vector<std::pair<const PolicyDistribution*, double>> parts{{&P, 0.5}};
    for (const auto& D : designs) parts.emplace_back(&D, 0.5 / 2.0);
    PolicyDistribution tilde = PolicyDistribution::mixture(parts);
    CHECK(weight_of(tilde, base) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(weight_of(tilde, a) == doctest::Approx(0.0625));
    CHECK(weight_of(tilde, b) == doctest::Approx(0.4375));
    CHECK(tilde.support_size() == 3);
}

TEST_CASE("SpanRL bookkeeping") {
    LowRankMdp env = desk_env(5);
    Rng crng(5);
    FeatureClass cls = make_feature_class(env, 2, crng);
    SpanRlSchedule sch = small_spanrl();
    sch.eps = SpanRlSchedule::paper_eps(reachability_eta(env), 2);
    Rng rng(11);
    RunResult r = run_spanrl(env, cls, sch, rng);
    const int H = env.horizon();
    REQUIRE(r.cover.psi.size() == static_cast<std::size_t>(H));
    CHECK(r.cover.psi[0].empty());
    CHECK(r.cover.psi[1].size() == 1);
    std::uint64_t expected = 0;
    for (const auto& st : r.cover.stages) {
        expected += sch.n_replearn + static_cast<std::uint64_t>(st.h) * sch.n_psdp * st.lin_opt_calls +
                    sch.n_estvec * st.lin_est_calls;
        CHECK(st.lin_opt_calls == st.lin_est_calls);
        CHECK(st.support == 2);
    }
    CHECK(r.episodes == expected);
    for (int h = 3; h <= H; ++h) {
        const auto& psi = r.cover.psi[static_cast<std::size_t>(h - 1)];
        CHECK(psi.size() == 2);
        for (const auto& pi : psi) {
            CHECK(pi->covers(h - 1));
            // the last covered layer plays uniformly
            CHECK(pi->table(h - 1).isApprox(Mat::Constant(env.num_states(h - 1), 2, 0.5)));
        }
        auto rep = check_policy_cover(env, r.cover.covers[static_cast<std::size_t>(h - 1)], h, 1.0 / 8.0, 0.0,
                                      CoverKind::set);
        CHECK(rep.pass);
    }
}

TEST_CASE("optimize_reward") {
    LowRankMdp env = desk_env(6, 3);
    FeatureClass cls{{env.phi()}, 0};
    CoverSet covers;
    covers.covers.push_back(PolicyDistribution::point_mass(Policy::empty()));
    covers.covers.push_back(uniform_over_deterministic(env, 1));
    Rng rng(2);

    SUBCASE("zero reward has value zero") {
        auto res = optimize_reward(env, cls, covers, {Vec::Zero(2), Vec::Zero(2)}, 500, rng);
        CHECK(res.value == 0.0);
        CHECK(res.policy.covers(2));
        CHECK(res.episodes == 2 * 500);
    }
    SUBCASE("near the DP optimum") {
        std::vector<Vec> theta{Vec::Zero(2), Vec(2)};
        theta[1] << 0.6, -0.8;
        auto res = optimize_reward(env, cls, covers, theta, 20000, rng);
        RewardTables tables;
        for (int t = 1; t <= 2; ++t) {
            Mat r(env.num_states(t), 2);
            for (int x = 0; x < r.rows(); ++x)
                for (int a = 0; a < 2; ++a) r(x, a) = env.phi().at(t, x, a).dot(theta[static_cast<std::size_t>(t - 1)]);
            tables.push_back(r);
        }
        const double best = solve_dp(env, tables, 2).value;
        CHECK(res.value == doctest::Approx(path_value(env, res.policy, tables, 2)).epsilon(1e-12));
        CHECK(res.value <= best + 1e-12);
        CHECK(best - res.value <= 0.05);
    }
    SUBCASE("argument checks") {
        CHECK_THROWS_AS(optimize_reward(env, cls, covers, {Vec::Zero(2)}, 10, rng), Error);
        Vec big(2);
        big << 1.0, 1.0;
        CHECK_THROWS_AS(optimize_reward(env, cls, covers, {Vec::Zero(2), big}, 10, rng), Error);
        Vec last(2);
        last << 0.5, 0.0;
        CHECK_THROWS_AS(optimize_reward(env, cls, covers, {Vec::Zero(2), Vec::Zero(2), last}, 10, rng), Error);
        CoverSet missing;
        CHECK_THROWS_AS(optimize_reward(env, cls, missing, {Vec::Zero(2), Vec::Zero(2)}, 10, rng), Error);
    }
}

TEST_CASE("errors carry the stage") {
    LowRankMdp env = desk_env(8);
    FeatureClass cls{{env.phi()}, 0};
    VoxSchedule sch = small_vox();
    sch.fw_max_iters = 1;
    sch.gamma = 1e-9;
    sch.C = 1.0001;
    Rng rng(1);
    try {
        run_vox(env, cls, sch, rng);
        // a single iteration may already certify the design
    } catch (const Error& e) {
        CHECK(std::string(e.what()).rfind("run_vox (h=1, k=1): ", 0) == 0);
    }
}
