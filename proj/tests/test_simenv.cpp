#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "voxlab/core.hpp"
#include "voxlab/simenv.hpp"

using namespace voxlab;
using namespace testing;

TEST_CASE("rank-1 generator gives identical transition rows") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(3, 3, 1, {2, 4, 3}, 2));
    CHECK(validate_mdp(env).ok());
    for (int h = 1; h <= 2; ++h) {
        const Mat& T = env.transition(h);
        for (Eigen::Index r = 1; r < T.rows(); ++r) CHECK((T.row(r) - T.row(0)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("exact occupancy") {
    SUBCASE("layer 1 is rho") {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {3, 3, 3}, 4));
        Policy pi = Policy::uniform(env, 1, 2);
        CHECK((exact_occupancy(env, pi, 1) - env.rho()).norm() == 0.0);
    }
    SUBCASE("two-layer example matches path enumeration") {
        LowRankMdp env = two_layer_mdp();
        Policy pi = Policy::deterministic(1, {{0, 1}}, 2);
        Vec d = exact_occupancy(env, pi, 2);
        // hand: 0.4 * (0.8, 0.2) + 0.6 * (0.0, 1.0)
        CHECK(d(0) == doctest::Approx(0.32).epsilon(1e-14));
        CHECK(d(1) == doctest::Approx(0.68).epsilon(1e-14));
        CHECK((d - path_occupancy(env, pi, 2)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("random envs agree with path enumeration and are distributions") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            LowRankMdp env = generate_low_rank_mdp(small_spec(4, 2, 3, {2, 3, 2, 3}, 100 + trial));
            Policy pi = random_policy(env, 1, 4, rng);
            for (int h = 1; h <= 4; ++h) {
                Vec d = exact_occupancy(env, pi, h);
                CHECK(std::abs(d.sum() - 1.0) < 1e-9);
                CHECK(d.minCoeff() >= -1e-12);
                CHECK((d - path_occupancy(env, pi, h)).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
    SUBCASE("layer out of range") {
        LowRankMdp env = two_layer_mdp();
        CHECK_THROWS_AS(exact_occupancy(env, Policy::uniform(env, 1, 2), 3), Error);
    }
}

TEST_CASE("occupancy factorizes through the previous feature expectation") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        EnvSpec s = small_spec(4, 1 + trial % 3, 1 + trial % 4, {2, 3, 4, 3}, 500 + trial);
        s.rotate = trial % 2 == 1;
        LowRankMdp env = generate_low_rank_mdp(s);
        Policy pi = random_policy(env, 1, 4, rng);
        int h = 2 + trial % 3;
        Vec d = exact_occupancy(env, pi, h);
        Vec e = exact_feature_expectation(env, pi, env.phi(), h - 1);
        CHECK((d - env.mu(h) * e).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("feature moments") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 2, 2}, 6));
    Policy pi = Policy::uniform(env, 1, 3);
    SUBCASE("constant features") {
        Vec v(3);
        v << 0.1, -0.5, 0.3;
        std::vector<Mat> tables;
        for (int h = 1; h <= 2; ++h) tables.push_back(v.transpose().replicate(env.num_states(h) * 2, 1));
        FeatureMap phi(2, tables);
        CHECK((exact_feature_expectation(env, pi, phi, 2) - v).norm() < 1e-14);
        CHECK((exact_second_moment(env, pi, phi, 2) - v * v.transpose()).norm() < 1e-14);
    }
    SUBCASE("uniform policy averages the per-action expectations") {
        Vec e = exact_feature_expectation(env, pi, env.phi(), 2);
        Vec avg = Vec::Zero(2);
        for (int a = 0; a < 2; ++a) {
            std::vector<std::vector<int>> acts = {{0, 0}, {a, a}};
            Policy pa = compose_policies(Policy::uniform(env, 1, 1), Policy::deterministic(2, {{a, a}}, 2));
            avg += 0.5 * exact_feature_expectation(env, pa, env.phi(), 2);
        }
        CHECK((e - avg).norm() < 1e-14);
    }
    SUBCASE("second moment is symmetric PSD") {
        Mat S = exact_second_moment(env, pi, env.phi(), 2);
        CHECK((S - S.transpose()).norm() == 0.0);
        CHECK(Eigen::SelfAdjointEigenSolver<Mat>(S).eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("trajectory sampling") {
    SUBCASE("deterministic MDP and policy give a unique trajectory") {
        Mat phi(2, 1);
        phi << 1.0, 1.0;
        Mat mu(1, 1);
        mu << 1.0;
        Vec rho(1);
        rho << 1.0;
        LowRankMdp env(2, {{0}, {1}}, FeatureMap(2, {phi}), {mu}, rho);
        Policy pi = Policy::deterministic(1, {{1}, {0}}, 2);
        Rng rng(3);
        for (int i = 0; i < 10; ++i) {
            Trajectory tr = sample_trajectory(env, pi, nullptr, rng);
            CHECK(tr.states == std::vector<int>{0, 0});
            CHECK(tr.actions == std::vector<int>{1, 0});
            CHECK(tr.rewards == std::vector<double>{0.0, 0.0});
        }
    }
    SUBCASE("layer-2 frequencies match exact occupancy") {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {3, 4, 2}, 21));
        Rng rng(4);
        Policy pi = random_policy(env, 1, 3, rng);
        Vec freq = Vec::Zero(4);
        const int n = 100000;
        for (int i = 0; i < n; ++i) freq(sample_trajectory(env, pi, nullptr, rng).states[1]) += 1.0 / n;
        double tv = 0.5 * (freq - exact_occupancy(env, pi, 2)).cwiseAbs().sum();
        CHECK(tv <= 0.02);
    }
    SUBCASE("reward tables are reported") {
        LowRankMdp env = two_layer_mdp();
        RewardTables r = {Mat::Constant(2, 2, 0.5), Mat::Constant(2, 2, 0.25)};
        Rng rng(1);
        Trajectory tr = sample_trajectory(env, Policy::uniform(env, 1, 2), &r, rng);
        CHECK(tr.rewards == std::vector<double>{0.5, 0.25});
    }
}

TEST_CASE("dynamic programming matches enumeration") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 2, 2}, 40 + trial));
        RewardTables r;
        for (int h = 1; h <= 3; ++h) {
            Mat m(2, 2);
            for (int i = 0; i < 4; ++i) m(i / 2, i % 2) = rng.uniform();
            r.push_back(m);
        }
        DpSolution sol = solve_dp(env, r, 3);
        double best = -1.0;
        for (const auto& pi : enumerate_deterministic_policies(env, 3)) best = std::max(best, path_value(env, pi, r, 3));
        CHECK(sol.value == doctest::Approx(best).epsilon(1e-12));
        CHECK(evaluate_policy(env, sol.policy, r, 3).value == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("max occupancy and reachability") {
    SUBCASE("max occupancy matches enumeration on 2x2x2") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 2, 2}, seed));
            auto pols = enumerate_deterministic_policies(env, 2);
            CHECK(pols.size() == 16);
            for (int h = 2; h <= 3; ++h) {
                Vec best = Vec::Zero(2);
                for (const auto& pi : pols) best = best.cwiseMax(exact_occupancy(env, pi, h));
                CHECK((max_occupancy(env, h) - best).cwiseAbs().maxCoeff() < 1e-12);
            }
        }
    }
    SUBCASE("rank-1 env: occupancy independent of the policy") {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 1, {2, 3, 3}, 9));
        Vec d = exact_occupancy(env, Policy::uniform(env, 1, 2), 3);
        double eta = std::numeric_limits<double>::infinity();
        for (int x = 0; x < 3; ++x)
            if (env.mu(3).row(x).norm() > 0) eta = std::min(eta, d(x) / env.mu(3).row(x).norm());
        CHECK(reachability_eta(env, 3) == doctest::Approx(eta).epsilon(1e-12));
    }
    SUBCASE("boosted env reaches the floor") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            LowRankMdp env = generate_low_rank_mdp(small_spec(4, 2, 3, {3, 4, 5, 4}, seed, 0.05));
            CHECK(reachability_eta(env) >= 0.05 - 1e-12);
        }
    }
    SUBCASE("budget is enforced") {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {3, 3, 3}, 1));
        CHECK_THROWS_AS(reachability_eta(env, 3, 10.0), Error);
    }
}

TEST_CASE("enumeration budget") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {5, 5, 5}, 1));
    CHECK(count_deterministic_policies(env, 2) == 1024.0);
    CHECK_THROWS_AS(enumerate_deterministic_policies(env, 2, 100.0), Error);
}
