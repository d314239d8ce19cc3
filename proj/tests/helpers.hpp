#pragma once

// Shared fixtures and independent brute-force oracles for the test suites.

#include <functional>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/optdesign.hpp"
#include "voxlab/simenv.hpp"
#include "voxlab/spanner.hpp"

namespace testing {

using namespace voxlab;

/// H=2, A=2, d=2 with X_1 = {0, 1}, X_2 = {2, 3}. Action 0 leans to state 2.
inline LowRankMdp two_layer_mdp() {
    Mat phi(4, 2);
    phi << 0.8, 0.2,   // (x=0, a=0)
        0.3, 0.7,      // (x=0, a=1)
        0.5, 0.5,      // (x=1, a=0)
        0.0, 1.0;      // (x=1, a=1)
    Mat mu = Mat::Identity(2, 2);
    Vec rho(2);
    rho << 0.4, 0.6;
    return LowRankMdp(2, {{0, 1}, {2, 3}}, FeatureMap(2, {phi}), {mu}, rho);
}

/// Visits every (x_1, a_1, ..., x_h) path and multiplies probabilities.
inline void for_each_path(const LowRankMdp& env, const Policy& pi, int h,
                          const std::function<void(const std::vector<int>& xs, const std::vector<int>& as, double p)>& fn) {
    const int A = env.num_actions();
    std::vector<int> xs, as;
    std::function<void(int, double)> rec = [&](int t, double p) {
        if (t > h) {
            fn(xs, as, p);
            return;
        }
        for (int x = 0; x < env.num_states(t); ++x) {
            double px = t == 1 ? env.rho()(x)
                               : env.mu(t).row(x).dot(env.phi().at(t - 1, xs.back(), as.back()));
            if (px == 0.0) continue;
            xs.push_back(x);
            if (t == h && !pi.covers(h)) {
                as.push_back(0);
                rec(t + 1, p * px);
                as.pop_back();
            } else {
                for (int a = 0; a < A; ++a) {
                    double pa = pi.prob(t, x, a);
                    if (pa == 0.0) continue;
                    as.push_back(a);
                    rec(t + 1, p * px * pa);
                    as.pop_back();
                }
            }
            xs.pop_back();
        }
    };
    rec(1, 1.0);
}

inline Vec path_occupancy(const LowRankMdp& env, const Policy& pi, int h) {
    Vec out = Vec::Zero(env.num_states(h));
    for_each_path(env, pi, h, [&](const std::vector<int>& xs, const std::vector<int>&, double p) { out(xs.back()) += p; });
    return out;
}

/// Expected sum of rewards over layers 1..h by path enumeration.
inline double path_value(const LowRankMdp& env, const Policy& pi, const RewardTables& r, int h) {
    double v = 0.0;
    for_each_path(env, pi, h, [&](const std::vector<int>& xs, const std::vector<int>& as, double p) {
        double s = 0.0;
        for (int t = 1; t <= h; ++t)
            if (t <= static_cast<int>(r.size()) && r[t - 1].size() > 0) s += r[t - 1](xs[t - 1], as[t - 1]);
        v += p * s;
    });
    return v;
}

inline EnvSpec small_spec(int H, int A, int d, std::vector<int> states, std::uint64_t seed, double boost = 0.0) {
    EnvSpec s;
    s.H = H;
    s.A = A;
    s.d_latent = d;
    s.states = std::move(states);
    s.seed = seed;
    s.boost_eta = boost;
    return s;
}

/// Random PSD family with ||W||_F <= 1: rank-1 v v^T (||v|| <= 1) mixed with
/// occasional rank-2 members.
inline std::vector<Mat> random_psd_family(int d, int size, Rng& rng) {
    std::vector<Mat> fam;
    for (int k = 0; k < size; ++k) {
        int rank = 1 + (rng.uniform() < 0.3);
        Mat W = Mat::Zero(d, d);
        for (int r = 0; r < rank; ++r) {
            Vec v(d);
            for (int i = 0; i < d; ++i) v(i) = rng.normal();
            W += v * v.transpose();
        }
        W /= W.norm();
        W *= 0.2 + 0.8 * rng.uniform();
        fam.push_back(W);
    }
    return fam;
}

inline std::size_t exact_lin_opt(const std::vector<Mat>& fam, const Mat& M) {
    std::size_t best = 0;
    double bv = -1e300;
    for (std::size_t z = 0; z < fam.size(); ++z) {
        double v = (M * fam[z]).trace();
        if (v > bv) {
            bv = v;
            best = z;
        }
    }
    return best;
}

inline Mat exact_lin_est(const std::vector<Mat>& fam, const Design<std::size_t>& P) {
    Mat out = Mat::Zero(fam.front().rows(), fam.front().cols());
    for (const auto& [z, w] : P) out += w * fam[z];
    return out;
}

inline DesignOracles<std::size_t> exact_design_oracles(const std::vector<Mat>& fam) {
    DesignOracles<std::size_t> o;
    o.dim = static_cast<int>(fam.front().rows());
    o.lin_opt = [&fam](const Mat& M) { return exact_lin_opt(fam, M); };
    o.lin_est = [&fam](const Design<std::size_t>& P) { return exact_lin_est(fam, P); };
    return o;
}

inline Mat psd_projection(const Mat& S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
}

/// Oracles erring at the stated levels: LinOpt returns the worst index whose
/// value is within eps_opt of the maximum (on the Frobenius-normalized M);
/// LinEst adds a random symmetric perturbation of Frobenius norm eps_est and
/// projects back to the PSD cone.
inline DesignOracles<std::size_t> noisy_design_oracles(const std::vector<Mat>& fam, double eps_opt, double eps_est,
                                                       Rng& rng) {
    DesignOracles<std::size_t> o;
    o.dim = static_cast<int>(fam.front().rows());
    o.lin_opt = [&fam, eps_opt](const Mat& M) {
        Mat Mn = M / M.norm();
        double best = -1e300;
        for (const auto& W : fam) best = std::max(best, (Mn * W).trace());
        std::size_t pick = 0;
        double pv = 1e300;
        for (std::size_t z = 0; z < fam.size(); ++z) {
            double v = (Mn * fam[z]).trace();
            if (v >= best - eps_opt && v < pv) {
                pv = v;
                pick = z;
            }
        }
        return pick;
    };
    o.lin_est = [&fam, eps_est, &rng](const Design<std::size_t>& P) {
        Mat W = exact_lin_est(fam, P);
        const int d = static_cast<int>(W.rows());
        Mat E(d, d);
        for (int i = 0; i < d * d; ++i) E.data()[i] = rng.normal();
        E = 0.5 * (E + E.transpose());
        E *= eps_est / E.norm();
        return Mat(psd_projection(W + E));
    };
    return o;
}

/// Random vectors in the unit ball.
inline std::vector<Vec> random_ball_family(int d, int size, Rng& rng) {
    std::vector<Vec> fam;
    for (int k = 0; k < size; ++k) {
        Vec v(d);
        for (int i = 0; i < d; ++i) v(i) = rng.normal();
        v *= std::pow(rng.uniform(), 1.0 / d) / v.norm();
        fam.push_back(v);
    }
    return fam;
}

/// Exact spanner oracles, or eps/2-accurate ones (worst index within eps/2
/// for LinOpt, a perturbation of norm eps/2 for LinEst) when noisy.
inline SpannerOracles<std::size_t> spanner_oracles(const std::vector<Vec>& fam, double eps, bool noisy, Rng& rng) {
    SpannerOracles<std::size_t> o;
    o.dim = static_cast<int>(fam.front().size());
    o.lin_opt = [&fam, eps, noisy](const Vec& theta) {
        double best = -1e300;
        std::size_t arg = 0;
        for (std::size_t z = 0; z < fam.size(); ++z) {
            double v = theta.dot(fam[z]);
            if (v > best) {
                best = v;
                arg = z;
            }
        }
        if (!noisy) return arg;
        double pv = 1e300;
        for (std::size_t z = 0; z < fam.size(); ++z) {
            double v = theta.dot(fam[z]);
            if (v >= best - eps / 2 && v < pv) {
                pv = v;
                arg = z;
            }
        }
        return arg;
    };
    o.lin_est = [&fam, eps, noisy, &rng](const std::size_t& z) {
        Vec w = fam[z];
        if (!noisy) return w;
        Vec e(w.size());
        for (int i = 0; i < e.size(); ++i) e(i) = rng.normal();
        return Vec(w + e * (eps / 2 / e.norm()));
    };
    return o;
}

}  // namespace testing
