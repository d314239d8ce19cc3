#include "voxlab/optdesign.hpp"

#include <algorithm>
#include <cmath>

namespace voxlab {

long fw_iteration_bound(double gamma, double C, int d) {
    return static_cast<long>(std::ceil(16.0 / (gamma * gamma * C * C * d) * std::log(1.0 + 1.0 / gamma)));
}

Mat clean_psd(const Mat& W, double max_frobenius, int* clip_events) {
    Mat S = 0.5 * (W + W.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const Vec& lam = es.eigenvalues();
    double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    if (lam.minCoeff() < -1e-8 * scale)
        throw Error("LinEst output is not PSD (smallest eigenvalue " + std::to_string(lam.minCoeff()) + ")");
    if (lam.minCoeff() < 0.0) {
        S = es.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
        S = 0.5 * (S + S.transpose());
    }
    double fro = S.norm();
    if (fro > max_frobenius) {
        S *= max_frobenius / fro;
        if (clip_events) ++*clip_events;
    }
    return S;
}

double log_det_regularized(const Mat& W, double gamma) {
    Mat M = gamma * Mat::Identity(W.rows(), W.cols()) + W;
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw Error("design_objective: matrix is not positive definite");
    return 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
}

double fw_line_search(const Mat& W0, const Mat& W1, double gamma) {
    const Mat M0 = gamma * Mat::Identity(W0.rows(), W0.cols()) + W0;
    const Mat D = W1 - W0;
    auto slope = [&](double mu) {
        Eigen::LLT<Mat> llt(M0 + mu * D);
        return llt.solve(D).trace();
    };
    if (slope(0.0) <= 0.0) return 0.0;
    if (slope(1.0) >= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        if (slope(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double design_certificate(const Mat& W_P, const std::vector<Mat>& family, double gamma) {
    if (family.empty()) throw Error("design_certificate: empty family");
    Mat M = gamma * Mat::Identity(W_P.rows(), W_P.cols()) + W_P;
    Eigen::LDLT<Mat> ldlt(M);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw Error("design_certificate: M is singular");
    double best = -std::numeric_limits<double>::infinity();
    for (const Mat& W : family) best = std::max(best, ldlt.solve(W).trace());
    return best;
}

}  // namespace voxlab
