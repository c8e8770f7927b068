#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowcanvas/backend.hpp"
#include "flowcanvas/config.hpp"
#include "flowcanvas/policy.hpp"
#include "flowcanvas/reward.hpp"
#include "flowcanvas/trajectory.hpp"

namespace flowcanvas {

class PolicyFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The director side of an episode: one raw think+action turn per call.
class PolicyAdapter {
  public:
    virtual ~PolicyAdapter() = default;
    virtual std::string next_turn(const std::string& history) = 0;
    /// Token records for the turn just emitted, when the adapter tracks
    /// logprobs (trajectory exports); empty otherwise.
    virtual std::vector<TokenRecord> last_turn_tokens() { return {}; }
};

struct ScriptTurn {
    std::string text;
    std::optional<double> logprob;  // yields a single masked token record
};

/// Replays a fixed turn list; throws PolicyFailure when the script runs dry.
class ScriptedDirector : public PolicyAdapter {
  public:
    explicit ScriptedDirector(std::vector<ScriptTurn> turns);
    /// JSONL of {"turn": ..., "logprob"?: ..., "task_id"?: ...}; rows carrying
    /// a task_id are kept only when it matches.
    static std::vector<ScriptTurn> load(const std::string& path,
                                        const std::string& task_filter = "");

    std::string next_turn(const std::string& history) override;
    std::vector<TokenRecord> last_turn_tokens() override;

  private:
    std::vector<ScriptTurn> turns_;
    std::size_t next_ = 0;
    std::vector<TokenRecord> last_tokens_;
};

/// Chat-model director over the HTTP backend.
class HttpDirector : public PolicyAdapter {
  public:
    HttpDirector(HttpBackendConfig config, GenerationParams generation);
    std::string next_turn(const std::string& history) override;

  private:
    HttpBackend backend_;
    GenerationParams generation_;
};

/// Debug director reading turns from stdin.
class StdinDirector : public PolicyAdapter {
  public:
    std::string next_turn(const std::string& history) override;
};

struct DatasetRecord {
    std::string task_id;
    std::string source;
    std::string task;
    std::string gold;  // answer text, or a test-suite path for code tasks
    TaskType task_type = TaskType::QA_EM;
};

std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Runs one full episode: seed the observation, loop the director against
/// the canvas until finish or the round budget, execute the finished graph,
/// score it, and assemble the trajectory. Canvas and engine failures land in
/// the trajectory; only adapter transport failures propagate.
Trajectory run_episode(const DatasetRecord& record, PolicyAdapter& policy,
                       const RunConfig& config, const RewardProfile& profile,
                       Backend& backend, const std::string& mock_path = "");

using PolicyFactory =
    std::function<std::unique_ptr<PolicyAdapter>(const DatasetRecord&, int episode_index)>;
using BackendFactory = std::function<std::unique_ptr<Backend>(const DatasetRecord&)>;

struct CollectResult {
    GroupBatch batch;
    std::vector<double> advantages;
    std::vector<Trajectory> trajectories;
};

/// N independent episodes of one record plus group-standardized advantages.
/// Episode failures propagate; partial groups are rejected.
CollectResult collect_group(const DatasetRecord& record, const PolicyFactory& policies,
                            const BackendFactory& backends, int n, const RunConfig& config,
                            const RewardProfile& profile, const std::string& mock_path = "");

struct ReplayDivergence {
    std::string task_id;
    int turn = 0;
    std::string expected;
    std::string actual;
};

struct ReplayReport {
    int episodes = 0;
    std::vector<ReplayDivergence> divergences;
};

/// Re-drives every recorded action through a fresh canvas + mock and
/// byte-compares each regenerated feedback line against the recording.
ReplayReport replay_episode(const std::string& trajectory_path,
                            const std::string& mock_override = "");
ReplayReport replay_one(const Trajectory& traj, const std::string& mock_override = "");

struct SourceMetrics {
    int count = 0;
    int failures = 0;
    std::optional<double> em;
    std::optional<double> f1;
    std::optional<double> accuracy;
    std::optional<double> pass1;
    double reward_mean = 0.0;
    double reward_min = 0.0;
    double reward_max = 0.0;
};

struct EvalSummary {
    std::map<std::string, SourceMetrics> per_source;
    int total = 0;
    int failures = 0;

    std::string table() const;
    nlohmann::json to_json() const;
};

/// Runs every dataset record once and aggregates task metrics per source.
/// Per-record failures are counted, not fatal.
EvalSummary eval_dataset(const std::vector<DatasetRecord>& records,
                         const PolicyFactory& policies, const BackendFactory& backends,
                         const RunConfig& config, const RewardProfile& profile,
                         const std::string& mock_path = "",
                         std::vector<Trajectory>* out_trajectories = nullptr);

/// Recomputes a trajectory's reward under a different profile (offline).
RewardBreakdown recompute_reward(const Trajectory& traj, const RewardProfile& profile,
                                 const SandboxConfig& sandbox);

}  // namespace flowcanvas
