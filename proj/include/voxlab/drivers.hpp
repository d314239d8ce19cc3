#pragma once

// The VoX and SpanRL exploration loops and downstream reward optimization.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "voxlab/core.hpp"
#include "voxlab/estimators.hpp"
#include "voxlab/optdesign.hpp"
#include "voxlab/psdp.hpp"
#include "voxlab/replearn.hpp"
#include "voxlab/rng.hpp"
#include "voxlab/spanner.hpp"

namespace voxlab {

enum class ScheduleMode { paper, direct };

struct VoxSchedule {
    ScheduleMode mode = ScheduleMode::direct;
    long K = 4;
    double gamma = 1e-3;
    std::uint64_t n_replearn = 20000;
    std::uint64_t n_estmat = 20000;
    std::uint64_t n_psdp = 2000;
    double c = 1.0;
    double eta = 0.1;
    double delta = 0.01;
    double C = 2.0;
    StepRule fw_step = StepRule::line_search;
    long fw_max_iters = 0;
    RepLearnConfig replearn;

    /// K = c eta^-2 d^5 A, gamma = eta^2 d^-4 / 576,
    /// n_replearn = c eta^-5 d^10 A^2 ln(|Phi|/delta),
    /// n_estmat = c gamma^-4 ln(1/delta),
    /// n_psdp = c eta^-1 gamma^-2 H^2 d^2 K A^2 (d + ln(|Phi|/delta)).
    /// Sample sizes saturate at 2^64 - 1.
    static VoxSchedule paper(double eta, int d, int A, int H, std::size_t num_features, double c = 1.0,
                             double delta = 0.01);
    void validate() const;
};

struct SpanRlSchedule {
    ScheduleMode mode = ScheduleMode::direct;
    double eps = 0.05;
    std::uint64_t n_replearn = 20000;
    std::uint64_t n_estvec = 20000;
    std::uint64_t n_psdp = 5000;
    double c = 1.0;
    double delta = 0.01;
    double C = 2.0;
    RepLearnConfig replearn;

    /// n_replearn = c eps^-2 A^2 d ln(|Phi|/delta), n_estvec = c eps^-2 ln(1/delta),
    /// n_psdp = c eps^-2 A^2 d^3 H^2 (d + ln(|Phi|/delta)).
    static SpanRlSchedule paper(double eps, int d, int A, int H, std::size_t num_features, double c = 1.0,
                                double delta = 0.01);
    /// eta / (36 d^{5/2}).
    static double paper_eps(double eta, int d) { return eta / (36.0 * std::pow(d, 2.5)); }
    void validate() const;
};

/// Per (h, k) record of a design or spanner computation.
struct StageRecord {
    int h = 0;
    long k = 0;
    std::size_t feature_index = 0;
    long replearn_iterations = 0;
    bool replearn_capped = false;
    long iterations = 0;         ///< FW iterations or spanner rounds
    double certificate = 0.0;    ///< final FW certificate (VoX)
    std::size_t support = 0;     ///< design support size or spanner size
    long lin_opt_calls = 0;      ///< PSDP calls
    long lin_est_calls = 0;      ///< estimator calls that drew samples
};

struct FwTrace {
    int h = 0;
    long k = 0;
    std::vector<FwLogEntry> log;
};

/// covers[h-1] = P^(h), whose policies cover layers 1..h-1.
struct CoverSet {
    std::vector<PolicyDistribution> covers;
    /// SpanRL only: psi[h-1] = Psi^(h) as a list (duplicates kept).
    std::vector<std::vector<PolicyRef>> psi;
    std::vector<StageRecord> stages;
};

struct RunResult {
    CoverSet cover;
    std::uint64_t episodes = 0;
    std::vector<FwTrace> fw;
};

RunResult run_vox(const LowRankMdp& env, const FeatureClass& features, const VoxSchedule& schedule, Rng& rng);
RunResult run_spanrl(const LowRankMdp& env, const FeatureClass& features, const SpanRlSchedule& schedule, Rng& rng);

struct OptimizeResult {
    Policy policy;  ///< over layers 1..H-1
    double value = 0.0;
    std::uint64_t episodes = 0;
};

/// PSDP over layers 1..H-1 with rewards r_h = theta_h^T phi*_h (theta[h-1],
/// ||theta_h|| <= 1) and value classes {phi^T w : phi in Phi, ||w|| <= 2 H sqrt(d)}.
/// Returns the greedy policy and its exact value.
OptimizeResult optimize_reward(const LowRankMdp& env, const FeatureClass& features, const CoverSet& covers,
                               const std::vector<Vec>& theta, std::uint64_t n, Rng& rng);

/// Plot data, header iter,objective,certificate; iterations are numbered
/// consecutively across all (h, k) runs.
std::string fw_csv(const std::vector<FwTrace>& traces);

}  // namespace voxlab
