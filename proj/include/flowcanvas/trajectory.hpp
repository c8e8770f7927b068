#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowcanvas/canvas.hpp"
#include "flowcanvas/engine.hpp"
#include "flowcanvas/policy.hpp"
#include "flowcanvas/reward.hpp"

namespace flowcanvas {

inline constexpr int kTrajectorySchemaVersion = 1;

class SchemaVersionMismatch : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything needed to replay an episode byte-for-byte: the recorded turns,
/// the final graph DSL, the execution answer and reward, plus the config
/// snapshot (profile, limits, fixture paths) the episode ran under.
struct Trajectory {
    int schema_version = kTrajectorySchemaVersion;
    std::string task_id;
    std::string source;
    std::string task;
    std::string gold;
    std::string task_type;
    std::vector<TurnEntry> turns;
    std::string final_dsl;
    std::string answer;
    RewardBreakdown reward;
    bool truncated = false;
    bool answer_from_fallback = false;
    std::vector<NodeTranscript> transcripts;
    std::vector<TokenRecord> tokens;  // optional policy-emitted token records

    // Config snapshot.
    std::string profile_name;
    int max_rounds = 20;
    int max_context_tokens = 16384;
    std::string mock_path;  // non-empty iff the episode ran against the mock
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const Trajectory& traj, bool include_timings);
Trajectory trajectory_from_json(const nlohmann::json& j);

void append_trajectory(const std::string& path, const Trajectory& traj, bool include_timings);
std::vector<Trajectory> load_trajectories(const std::string& path);

}  // namespace flowcanvas
