#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "voxlab/spanner.hpp"

using namespace voxlab;
using namespace testing;

TEST_CASE("round bound") {
    CHECK(spanner_round_bound(2, 2.0, 0.1) == 17);
}

TEST_CASE("spanner direction") {
    SUBCASE("identity") {
        for (int i = 0; i < 3; ++i) CHECK((spanner_direction(Mat::Identity(3, 3), i) - Vec::Unit(3, i)).norm() == 0.0);
    }
    SUBCASE("orthogonal to the other columns and matches determinants") {
        Rng rng(1);
        for (int trial = 0; trial < 20; ++trial) {
            int d = 2 + trial % 4;
            Mat W(d, d);
            for (int k = 0; k < d * d; ++k) W.data()[k] = rng.normal();
            for (int i = 0; i < d; ++i) {
                Vec th = spanner_direction(W, i);
                for (int j = 0; j < d; ++j)
                    if (j != i) CHECK(std::abs(th.dot(W.col(j))) < 1e-10);
                Vec v(d);
                for (int k = 0; k < d; ++k) v(k) = rng.normal();
                Mat V = W;
                V.col(i) = v;
                CHECK(std::abs(th.dot(v) - V.determinant()) < 1e-10);
            }
        }
    }
}

TEST_CASE("orthonormal family") {
    for (int d : {2, 3, 4}) {
        std::vector<Vec> fam;
        for (int i = 0; i < d; ++i) {
            fam.push_back(Vec::Unit(d, i));
            fam.push_back(-Vec::Unit(d, i));
        }
        Rng rng(0);
        SpannerOptions opt;
        opt.eps = 0.05;
        auto res = robust_spanner(spanner_oracles(fam, opt.eps, false, rng), opt);
        CHECK(res.rounds <= spanner_round_bound(d, opt.C, opt.eps));
        // chosen vectors are +-e_i; W is a perturbed basis
        Mat B(d, d);
        for (int i = 0; i < d; ++i) B.col(i) = fam[res.indices[i]];
        CHECK((res.W - B).norm() <= opt.eps * std::sqrt(double(d)) + 1e-12);
        for (const auto& c : verify_spanner(B, fam, opt.C, opt.eps)) {
            CHECK(c.pass);
            CHECK(c.beta.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("random families") {
    Rng rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        int d = 2 + trial % 3;
        auto fam = random_ball_family(d, 10 + trial, rng);
        for (bool noisy : {false, true}) {
            SpannerOptions opt;
            opt.eps = 0.05;
            Rng noise(trial);
            auto res = robust_spanner(spanner_oracles(fam, opt.eps, noisy, noise), opt);
            CHECK(res.rounds <= spanner_round_bound(d, opt.C, opt.eps));
            for (std::size_t k = 1; k < res.abs_det.size(); ++k)
                if (static_cast<int>(k) >= d) CHECK(res.abs_det[k] >= opt.C * res.abs_det[k - 1] * (1 - 1e-12));
            for (int i = 0; i < d; ++i) CHECK(res.W.col(i).norm() <= 1 + 1.5 * opt.eps + (noisy ? opt.eps / 2 : 0.0));
            Mat B(d, d);
            for (int i = 0; i < d; ++i) B.col(i) = fam[res.indices[i]];
            for (const auto& c : verify_spanner(B, fam, opt.C, opt.eps)) CHECK(c.pass);
        }
    }
}

TEST_CASE("verify_spanner basics") {
    Mat B = Mat::Identity(3, 3);
    B(0, 1) = 0.5;
    auto checks = verify_spanner(B, {B.col(1), Vec::Zero(3)}, 2.0, 0.01);
    CHECK((checks[0].beta - Vec::Unit(3, 1)).norm() < 1e-14);
    CHECK(checks[0].residual < 1e-14);
    CHECK(checks[1].beta.norm() == 0.0);
    CHECK(checks[0].pass);
    Vec far(3);
    far << 5.0, 0.0, 0.0;
    auto f = verify_spanner(B, {far}, 2.0, 0.01);
    CHECK_FALSE(f[0].pass);
    CHECK(f[0].beta.cwiseAbs().maxCoeff() <= 2.0 + 1e-12);
    CHECK_THROWS_AS(verify_spanner(Mat::Zero(2, 2), {Vec::Zero(2)}, 2.0, 0.1), Error);
}

TEST_CASE("flat family takes the + branch") {
    // every member is zero along e_1 so both queries tie at zero
    std::vector<Vec> fam = {Vec::Unit(2, 1), -Vec::Unit(2, 1), Vec::Zero(2)};
    Rng rng(0);
    SpannerOptions opt;
    opt.eps = 0.1;
    auto res = robust_spanner(spanner_oracles(fam, opt.eps, false, rng), opt);
    CHECK(res.W(0, 0) > 0.0);
}
