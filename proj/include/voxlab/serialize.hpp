#pragma once

// JSON persistence for environments, policies, schedules and run results.
//
// Environment schema:
//   {"H": int, "A": int, "d": int, "layers": [[state ids]],
//    "phi": [h][x][a][d] for h = 1..H-1, "mu": [h][x][d] for h = 2..H,
//    "rho": [p(x) for x in X_1]}
// Policy schema: {"first": int, "tables": [layer][x][a]}.
// Keys are written in a fixed order and doubles in shortest round-trip
// decimal, so equal inputs give byte-identical files.

#include <string>

#include <json.hpp>

#include "voxlab/core.hpp"
#include "voxlab/drivers.hpp"

namespace voxlab {

using Json = nlohmann::ordered_json;

Json env_to_json(const LowRankMdp& env);
LowRankMdp env_from_json(const Json& j);

Json policy_to_json(const Policy& pi);
Policy policy_from_json(const Json& j);

/// [{"weight": w, "policy": {...}}, ...]
Json distribution_to_json(const PolicyDistribution& P);
PolicyDistribution distribution_from_json(const Json& j);

Json replearn_config_to_json(const RepLearnConfig& cfg);
RepLearnConfig replearn_config_from_json(const Json& j);

/// Shapes needed to resolve paper-mode schedules.
struct ProblemShape {
    int d = 0;
    int A = 0;
    int H = 0;
    std::size_t num_features = 0;
};

/// Missing keys keep their defaults; unknown keys throw. In paper mode the
/// derived knobs (K, gamma, sample sizes, eps) must be absent and are
/// computed from eta by VoxSchedule::paper or SpanRlSchedule::paper.
VoxSchedule vox_schedule_from_json(const Json& j, const ProblemShape& shape);
Json vox_schedule_to_json(const VoxSchedule& s);
SpanRlSchedule spanrl_schedule_from_json(const Json& j, const ProblemShape& shape);
Json spanrl_schedule_to_json(const SpanRlSchedule& s);

Json stage_to_json(const StageRecord& st);

/// Throws Error naming the path on failure.
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
/// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

}  // namespace voxlab
