#pragma once

// Approximate barycentric spanners from approximate linear-optimization and
// index-to-vector oracles.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "voxlab/core.hpp"

namespace voxlab {

template <class Z>
struct SpannerOracles {
    int dim = 0;
    /// Index approximately maximizing theta^T w^z for a unit vector theta.
    std::function<Z(const Vec& theta)> lin_opt;
    /// Approximation of w^z.
    std::function<Vec(const Z& z)> lin_est;
};

struct SpannerOptions {
    double C = 2.0;
    double eps = 0.05;
    /// 0 means the round bound.
    long max_rounds = 0;
};

template <class Z>
struct SpannerResult {
    std::vector<Z> indices;  ///< z_1..z_d
    Mat W;                   ///< working columns w_i (estimates plus perturbation)
    Mat W_est;               ///< raw estimates w~_i
    long rounds = 0;         ///< phase-one steps plus phase-two swaps
    long swaps = 0;
    std::vector<double> abs_det;  ///< |det W| after every round
};

/// d + ceil((d / 2) log_C(100 d / eps^2)).
long spanner_round_bound(int d, double C, double eps);

/// theta with theta^T v = det(W with column i replaced by v), one LU per
/// coordinate.
Vec spanner_direction(const Mat& W, int i);

/// Determinant below which phase one keeps the e_i placeholder.
inline constexpr double kSpannerDetFloor = 1e-14;

template <class Z>
SpannerResult<Z> robust_spanner(const SpannerOracles<Z>& oracles, const SpannerOptions& opt) {
    const int d = oracles.dim;
    if (d < 1) throw Error("robust_spanner: oracle dimension must be positive");
    if (!(opt.C > 1.0)) throw Error("robust_spanner: C must exceed 1");
    if (!(opt.eps > 0.0 && opt.eps < 1.0)) throw Error("robust_spanner: eps must be in (0, 1)");
    const long bound = spanner_round_bound(d, opt.C, opt.eps);
    const long max_rounds = opt.max_rounds > 0 ? opt.max_rounds : bound;

    SpannerResult<Z> res;
    res.W = Mat::Identity(d, d);
    res.W_est = Mat::Identity(d, d);
    std::vector<std::optional<Z>> chosen(static_cast<std::size_t>(d));

    auto query = [&](const Vec& u) {
        Z z = oracles.lin_opt(u);
        Vec w = oracles.lin_est(z);
        if (w.size() != d) throw Error("robust_spanner: LinEst output has the wrong dimension");
        return std::make_pair(z, w);
    };
    auto set_column = [&](int i, const Z& z, const Vec& w_est, const Vec& u, double sign) {
        chosen[static_cast<std::size_t>(i)] = z;
        res.W_est.col(i) = w_est;
        res.W.col(i) = w_est + sign * opt.eps * u;
        ++res.rounds;
        res.abs_det.push_back(std::abs(res.W.determinant()));
    };
    auto over_budget = [&] {
        if (res.rounds > max_rounds)
            throw Error("robust_spanner: exceeded " + std::to_string(max_rounds) + " rounds (bound " +
                        std::to_string(bound) + ")");
    };

    for (int i = 0; i < d; ++i) {
        Vec theta = spanner_direction(res.W, i);
        double tn = theta.norm();
        if (tn < kSpannerDetFloor) continue;
        Vec u = theta / tn;
        auto [zp, wp] = query(u);
        auto [zm, wm] = query(-u);
        if (theta.dot(wp) >= -theta.dot(wm))
            set_column(i, zp, wp, u, 1.0);
        else
            set_column(i, zm, wm, u, -1.0);
    }

    while (true) {
        bool swapped = false;
        for (int i = 0; i < d && !swapped; ++i) {
            Vec theta = spanner_direction(res.W, i);
            double tn = theta.norm();
            if (tn < kSpannerDetFloor) continue;
            Vec u = theta / tn;
            const double target = opt.C * std::abs(res.W.determinant());
            auto [zp, wp] = query(u);
            auto [zm, wm] = query(-u);
            if (theta.dot(wp) + opt.eps * tn >= target) {
                set_column(i, zp, wp, u, 1.0);
                swapped = true;
            } else if (-theta.dot(wm) + opt.eps * tn >= target) {
                set_column(i, zm, wm, u, -1.0);
                swapped = true;
            }
            if (swapped) {
                ++res.swaps;
                over_budget();
            }
        }
        if (!swapped) break;
    }

    for (int i = 0; i < d; ++i) {
        if (!chosen[static_cast<std::size_t>(i)])
            throw Error("robust_spanner: column " + std::to_string(i + 1) + " was never filled from the family");
        res.indices.push_back(*chosen[static_cast<std::size_t>(i)]);
    }
    return res;
}

struct SpanCheck {
    Vec beta;
    double residual = 0.0;
    bool pass = false;
};

/// For each test vector v: coefficients beta with |beta_i| <= C minimizing
/// ||v - basis * beta|| (the exact solve when it is within the box), the
/// residual, and pass iff max |beta| <= C + tol and residual <= 3 C d eps / 2
/// + tol. Throws on a singular basis.
std::vector<SpanCheck> verify_spanner(const Mat& basis, const std::vector<Vec>& tests, double C, double eps,
                                      double tol = 1e-9);

}  // namespace voxlab
