#pragma once

// Frank-Wolfe maximization of log det(gamma I + E_P[W^z]) over distributions
// P on an implicit index set, driven by approximate LinOpt / LinEst oracles.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "voxlab/core.hpp"

namespace voxlab {

/// Finite-support distribution over abstract indices.
template <class Z>
using Design = std::vector<std::pair<Z, double>>;

template <class Z>
struct DesignOracles {
    int dim = 0;
    /// Index approximately maximizing Tr(M W^z) for a PSD M.
    std::function<Z(const Mat& M)> lin_opt;
    /// Approximation of E_{z ~ P}[W^z].
    std::function<Mat(const Design<Z>& P)> lin_est;
};

enum class StepRule {
    paper,        ///< mu = C gamma^2 d / 8
    line_search,  ///< exact maximizer of log det along the segment
};

struct FwOptions {
    double C = 2.0;
    double gamma = 0.1;
    /// 0 means twice the iteration bound (capped at max_iters_cap).
    long max_iters = 0;
    long max_iters_cap = 50'000'000;
    StepRule step = StepRule::paper;
    /// LinEst outputs with larger Frobenius norm are scaled back to it.
    double max_frobenius = std::numeric_limits<double>::infinity();
};

struct FwLogEntry {
    long iter = 0;
    double objective = 0.0;    ///< log det M_t
    double certificate = 0.0;  ///< Tr(M_t^{-1} W_t)
    double step = 0.0;         ///< 0 on the terminating iteration
};

template <class Z>
struct FwResult {
    Design<Z> design;
    Mat M;  ///< gamma I + LinEst(design)
    long iterations = 0;
    std::vector<FwLogEntry> log;
    int clip_events = 0;
};

/// ceil(16 gamma^-2 C^-2 d^-1 ln(1 + 1/gamma)).
long fw_iteration_bound(double gamma, double C, int d);
/// C gamma^2 d / 8.
inline double fw_paper_step(double gamma, double C, int d) { return C * gamma * gamma * d / 8.0; }

/// Symmetrizes, clips negative eigenvalues at zero and optionally scales to a
/// Frobenius bound. Throws if an eigenvalue is below -1e-8 (relative).
Mat clean_psd(const Mat& W, double max_frobenius, int* clip_events = nullptr);

/// log det(gamma I + W) by Cholesky.
double log_det_regularized(const Mat& W, double gamma);

/// Exact maximizer over [0, 1] of log det(M0 + mu (W1 - W0)), M0 = gamma I + W0.
double fw_line_search(const Mat& W0, const Mat& W1, double gamma);

template <class Z, class Eq = std::equal_to<Z>>
FwResult<Z> fw_optdesign(const DesignOracles<Z>& oracles, const FwOptions& opt, Eq same = Eq{}) {
    if (!(opt.C > 1.0 && opt.C <= 2.0)) throw Error("fw_optdesign: C must be in (1, 2]");
    if (!(opt.gamma > 0.0 && opt.gamma < 1.0)) throw Error("fw_optdesign: gamma must be in (0, 1)");
    const int d = oracles.dim;
    if (d < 1) throw Error("fw_optdesign: oracle dimension must be positive");
    FwResult<Z> res;
    const Mat I = Mat::Identity(d, d);
    res.design.push_back({oracles.lin_opt(I), 1.0});
    Mat W_P = clean_psd(oracles.lin_est(res.design), opt.max_frobenius, &res.clip_events);
    if (W_P.rows() != d) throw Error("fw_optdesign: LinEst output has the wrong dimension");
    const long bound = fw_iteration_bound(opt.gamma, opt.C, d);
    long max_iters = opt.max_iters > 0 ? opt.max_iters : std::min(2 * bound, opt.max_iters_cap);

    for (long t = 1;; ++t) {
        if (t > max_iters)
            throw Error("fw_optdesign: no termination within " + std::to_string(max_iters) +
                        " iterations (iteration bound " + std::to_string(bound) + ")");
        Mat M = opt.gamma * I + W_P;
        Eigen::LLT<Mat> llt(M);
        if (llt.info() != Eigen::Success) throw Error("fw_optdesign: M_t is not positive definite");
        Mat Minv = llt.solve(I);
        Minv = 0.5 * (Minv + Minv.transpose());
        Z z = oracles.lin_opt(Minv / Minv.norm());
        Mat W = clean_psd(oracles.lin_est(Design<Z>{{z, 1.0}}), opt.max_frobenius, &res.clip_events);
        double cert = llt.solve(W).trace();
        double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
        res.iterations = t;
        if (cert <= (1.0 + opt.C) * d) {
            res.log.push_back({t, logdet, cert, 0.0});
            res.M = M;
            return res;
        }
        double mu = opt.step == StepRule::paper ? fw_paper_step(opt.gamma, opt.C, d) : fw_line_search(W_P, W, opt.gamma);
        res.log.push_back({t, logdet, cert, mu});
        for (auto& e : res.design) e.second *= (1.0 - mu);
        bool merged = false;
        for (auto& e : res.design) {
            if (same(e.first, z)) {
                e.second += mu;
                merged = true;
                break;
            }
        }
        if (!merged) res.design.push_back({z, mu});
        W_P = clean_psd(oracles.lin_est(res.design), opt.max_frobenius, &res.clip_events);
    }
}

/// log det(gamma I + LinEst(P)).
template <class Z>
double design_objective(const Design<Z>& P, const DesignOracles<Z>& oracles, double gamma) {
    return log_det_regularized(clean_psd(oracles.lin_est(P), std::numeric_limits<double>::infinity()), gamma);
}

/// sup over the family of Tr(M^{-1} W) with M = gamma I + W_P (gamma may be 0
/// when W_P is nonsingular).
double design_certificate(const Mat& W_P, const std::vector<Mat>& family, double gamma);

}  // namespace voxlab
