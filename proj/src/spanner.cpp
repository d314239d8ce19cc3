#include "voxlab/spanner.hpp"

#include <algorithm>
#include <cmath>

namespace voxlab {

long spanner_round_bound(int d, double C, double eps) {
    return d + static_cast<long>(std::ceil(0.5 * d * std::log(100.0 * d / (eps * eps)) / std::log(C)));
}

Vec spanner_direction(const Mat& W, int i) {
    const Eigen::Index d = W.rows();
    if (W.cols() != d) throw Error("spanner_direction: W must be square");
    if (i < 0 || i >= d) throw Error("spanner_direction: column index out of range");
    Vec theta(d);
    Mat V = W;
    for (Eigen::Index j = 0; j < d; ++j) {
        V.col(i) = Vec::Unit(d, j);
        theta(j) = Eigen::PartialPivLU<Mat>(V).determinant();
    }
    return theta;
}

namespace {

// min ||B beta - v|| over the box |beta_i| <= C by cyclic coordinate descent.
Vec box_least_squares(const Mat& B, const Vec& v, double C, Vec beta) {
    const Mat G = B.transpose() * B;
    const Vec b = B.transpose() * v;
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double change = 0.0;
        for (Eigen::Index i = 0; i < beta.size(); ++i) {
            if (G(i, i) <= 0.0) continue;
            double r = b(i) - G.row(i).dot(beta) + G(i, i) * beta(i);
            double nb = std::clamp(r / G(i, i), -C, C);
            change = std::max(change, std::abs(nb - beta(i)));
            beta(i) = nb;
        }
        if (change < 1e-15) break;
    }
    return beta;
}

}  // namespace

std::vector<SpanCheck> verify_spanner(const Mat& basis, const std::vector<Vec>& tests, double C, double eps,
                                      double tol) {
    const Eigen::Index d = basis.rows();
    if (basis.cols() != d) throw Error("verify_spanner: basis must be square");
    Eigen::FullPivLU<Mat> lu(basis);
    if (lu.rank() < d) throw Error("verify_spanner: singular basis");
    const double allowed = 1.5 * C * static_cast<double>(d) * eps;
    std::vector<SpanCheck> out;
    out.reserve(tests.size());
    for (const Vec& v : tests) {
        SpanCheck c;
        c.beta = lu.solve(v);
        if (c.beta.cwiseAbs().maxCoeff() > C) c.beta = box_least_squares(basis, v, C, c.beta.cwiseMax(-C).cwiseMin(C));
        c.residual = (v - basis * c.beta).norm();
        c.pass = c.beta.cwiseAbs().maxCoeff() <= C + tol && c.residual <= allowed + tol;
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace voxlab
