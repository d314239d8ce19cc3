#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "voxlab/core.hpp"
#include "voxlab/rng.hpp"
#include "voxlab/simenv.hpp"

using namespace voxlab;
using namespace testing;

TEST_CASE("composition plays prefix then suffix") {
    Policy prefix = Policy::deterministic(1, {{0, 0}}, 2);
    Policy suffix = Policy::deterministic(2, {{1, 1, 1}}, 2);
    Policy c = compose_policies(prefix, suffix);
    CHECK(c.first_layer() == 1);
    CHECK(c.last_layer() == 2);
    CHECK(c.prob(1, 0, 0) == 1.0);
    CHECK(c.prob(1, 1, 0) == 1.0);
    CHECK(c.prob(2, 2, 1) == 1.0);
}

TEST_CASE("uniform composed with uniform is uniform") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(4, 3, 2, {2, 3, 2, 2}, 1));
    Policy c = compose_policies(Policy::uniform(env, 1, 2), Policy::uniform(env, 3, 4));
    CHECK(c == Policy::uniform(env, 1, 4));
}

TEST_CASE("composition range mismatch names both ranges") {
    Policy prefix = Policy::deterministic(1, {{0}}, 2);
    Policy suffix = Policy::deterministic(3, {{0}}, 2);
    try {
        compose_policies(prefix, suffix);
        FAIL("expected an error");
    } catch (const Error& e) {
        std::string msg = e.what();
        CHECK(msg.find("[1..1]") != std::string::npos);
        CHECK(msg.find("[3..3]") != std::string::npos);
    }
}

TEST_CASE("composition is associative on abutting ranges") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(4, 2, 2, {2, 2, 3, 2}, 3));
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Policy p1 = random_policy(env, 1, 1, rng);
        Policy p2 = random_policy(env, 2, 2, rng);
        Policy p3 = random_policy(env, 3, 4, rng);
        Policy left = compose_policies(compose_policies(p1, p2), p3);
        // right association: shift p2 o p3 as a suffix starting at layer 2
        std::vector<Mat> tail = {p2.table(2), p3.table(3), p3.table(4)};
        Policy right = compose_policies(p1, Policy(2, tail));
        CHECK(left == right);
    }
}

TEST_CASE("composition with a uniform suffix matches path enumeration") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 3, 3}, 5));
    Rng rng(1);
    Policy pi = random_deterministic_policy(env, 1, 1, rng);
    Policy c = compose_policies(pi, Policy::uniform(env, 2, 2));
    Vec exact = exact_occupancy(env, c, 3);
    Vec paths = path_occupancy(env, c, 3);
    CHECK((exact - paths).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixture sampling") {
    LowRankMdp env = two_layer_mdp();
    auto a = make_policy_ref(Policy::deterministic(1, {{0, 0}}, 2));
    auto b = make_policy_ref(Policy::deterministic(1, {{1, 1}}, 2));
    Rng rng(42);

    SUBCASE("point mass") {
        auto P = PolicyDistribution::point_mass(a);
        for (int i = 0; i < 100; ++i) CHECK(&P.sample(rng) == a.get());
    }
    SUBCASE("even split frequencies") {
        PolicyDistribution P({{a, 0.5}, {b, 0.5}});
        int hits = 0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) hits += (&P.sample(rng) == a.get());
        CHECK(std::abs(hits / double(n) - 0.5) <= 0.02);
    }
    SUBCASE("zero weight never drawn") {
        PolicyDistribution P({{a, 1.0}, {b, 0.0}});
        for (int i = 0; i < 10000; ++i) CHECK(&P.sample(rng) == a.get());
    }
    SUBCASE("empty support") {
        PolicyDistribution P;
        CHECK_THROWS_AS(P.sample(rng), Error);
    }
    SUBCASE("weights must sum to one") { CHECK_THROWS_AS(PolicyDistribution({{a, 0.3}, {b, 0.3}}), Error); }
}

TEST_CASE("mixture merges identical policies") {
    auto a = make_policy_ref(Policy::deterministic(1, {{0, 0}}, 2));
    auto a2 = make_policy_ref(Policy::deterministic(1, {{0, 0}}, 2));
    auto b = make_policy_ref(Policy::deterministic(1, {{1, 1}}, 2));
    auto P = PolicyDistribution::point_mass(a);
    PolicyDistribution Q({{a2, 0.5}, {b, 0.5}});
    auto M = PolicyDistribution::mixture({{&P, 0.5}, {&Q, 0.5}});
    REQUIRE(M.support_size() == 2);
    CHECK(M.entries()[0].weight == doctest::Approx(0.75));
    CHECK(M.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("validate_mdp") {
    SUBCASE("generator output is valid") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            LowRankMdp env = generate_low_rank_mdp(small_spec(4, 3, 3, {3, 4, 5, 2}, seed, seed % 2 ? 0.05 : 0.0));
            auto rep = validate_mdp(env);
            CHECK(rep.ok());
            CHECK(rep.spot_check_max_norm <= std::sqrt(3.0) + 1e-12);
        }
    }
    SUBCASE("spec example H=3 A=2 d=2 states=[2,3,3] seed=7") {
        LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 3, 3}, 7));
        CHECK(validate_mdp(env).ok());
    }
    SUBCASE("negative transition density is located") {
        Mat phi(4, 2);
        phi << 1.0, 0.0, 0.0, 1.0, 0.5, 0.5, 0.5, 0.5;
        Mat mu(2, 2);
        mu << 1.2, 0.0,  // T(x'=0 | x=0, a=0) = 1.2, T(x'=1 | 0, 0) = -0.2
            -0.2, 1.0;
        Vec rho = Vec::Constant(2, 0.5);
        LowRankMdp env(2, {{0, 1}, {2, 3}}, FeatureMap(2, {phi}), {mu}, rho);
        auto rep = validate_mdp(env);
        REQUIRE_FALSE(rep.ok());
        bool found = false;
        for (const auto& v : rep.violations) {
            if (v.kind == "negative_transition") {
                CHECK(v.layer == 1);
                CHECK(v.state == 0);
                CHECK(v.action == 0);
                CHECK(v.next_state == 1);
                found = true;
            }
        }
        CHECK(found);
    }
    SUBCASE("scaled features violate the norm bound") {
        LowRankMdp base = two_layer_mdp();
        Mat phi = base.phi().layer(1) * 2.0;
        LowRankMdp env(2, {{0, 1}, {2, 3}}, FeatureMap(2, {phi}), {base.mu(2)}, base.rho());
        auto rep = validate_mdp(env);
        bool norm = false;
        for (const auto& v : rep.violations) norm |= v.kind == "phi_norm";
        CHECK(norm);
    }
    SUBCASE("rotated factorization is valid") {
        EnvSpec s = small_spec(3, 2, 3, {3, 4, 4}, 11);
        s.rotate = true;
        LowRankMdp env = generate_low_rank_mdp(s);
        CHECK(validate_mdp(env).ok());
    }
}

TEST_CASE("simulated transitions match the factorization (chi-square)") {
    LowRankMdp env = generate_low_rank_mdp(small_spec(3, 2, 2, {2, 3, 4}, 13));
    // 0.999 quantiles of chi-square with 1..5 degrees of freedom
    const double crit[] = {0, 10.828, 13.816, 16.266, 18.467, 20.515};
    Rng rng(77);
    const int n = 100000;
    for (int h = 1; h <= 2; ++h) {
        for (int x = 0; x < env.num_states(h); ++x) {
            for (int a = 0; a < env.num_actions(); ++a) {
                Vec obs = Vec::Zero(env.num_states(h + 1));
                for (int i = 0; i < n; ++i) obs(sample_next_state(env, h, x, a, rng)) += 1.0;
                Vec p = env.transition(h).row(x * env.num_actions() + a).transpose();
                double stat = 0.0;
                int df = -1;
                for (int k = 0; k < p.size(); ++k) {
                    if (p(k) <= 0) continue;
                    double e = n * p(k);
                    stat += (obs(k) - e) * (obs(k) - e) / e;
                    ++df;
                }
                if (df >= 1) CHECK(stat < crit[df]);
            }
        }
    }
}

TEST_CASE("discriminator evaluation takes the max over actions") {
    LowRankMdp env = two_layer_mdp();
    FeatureClass cls{{env.phi()}, 0};
    Vec theta(2);
    theta << 1.0, 0.0;
    Discriminator f{theta, 0};
    Vec v = f.evaluate(cls, 1);
    CHECK(v(0) == doctest::Approx(0.8));
    CHECK(v(1) == doctest::Approx(0.5));
}
