#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flowcanvas/backend.hpp"
#include "flowcanvas/graph.hpp"
#include "flowcanvas/operators.hpp"
#include "flowcanvas/sandbox.hpp"

namespace flowcanvas {

struct RunNodeStep {
    NodeId node;
};
struct ForkJoinStep {
    std::vector<NodeId> branches;
};
struct BranchStep {
    NodeId condition;
    NodeId true_branch;
    std::optional<NodeId> false_branch;
};
struct BoundedLoopStep;

using PlanStep = std::variant<RunNodeStep, ForkJoinStep, BranchStep, BoundedLoopStep>;

struct BoundedLoopStep {
    std::vector<PlanStep> body;
    int max_iter = 1;
};

struct ExecutionPlan {
    std::vector<PlanStep> steps;
};

class InvalidGraph : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Deterministic stage-order plan. Requires validate_graph(graph) == [] and a
/// non-empty graph.
ExecutionPlan plan_schedule(const WorkflowGraph& graph);

struct NodeTranscript {
    std::string node_id;
    std::string op;
    int iteration = 0;  // loop instance index, 0 outside loops
    std::string prompt;
    std::string request;   // rendered backend request (user message), if any
    std::string response;  // raw backend response, if any
    std::optional<SandboxResult> sandbox;
    SlotMap outputs;
    std::vector<std::string> warnings;
    bool errored = false;
    std::chrono::milliseconds wall_time{0};
};

struct EngineLimits {
    std::chrono::milliseconds total{600000};
    std::chrono::milliseconds per_node{120000};
};

struct EngineContext {
    std::string task;
    Backend* backend = nullptr;
    double temperature = 0.0;  // executor temperature, 0 for determinism
    SandboxConfig sandbox;
    std::string tests_text;  // JSONL test suite injected into Test nodes
    EngineLimits limits;
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

struct ConditionEval {
    bool repair = false;   // true: checker failed, take the repair branch
    bool parsed = false;
};

/// Inspects pass_fail / is_correct slots case-insensitively over
/// {true,false,pass,fail,passed,failed}. Unparseable defaults to repair with
/// parsed=false, since re-checking is the safe action.
ConditionEval evaluate_condition(const SlotMap& condition_output);

struct StageOutcome {
    SlotMap outputs;
    std::string summary;  // single-line rendering for canvas feedback
    bool checker_failed = false;
    bool had_error = false;
    std::vector<NodeTranscript> transcripts;
};

/// Executes one stage with the inbound slot map. Parallel branches run
/// concurrently unless the backend demands serial order; the join collects by
/// branch index. Conditionals run the condition node and exactly one side.
/// Loops rerun the body until its last checker passes or max_iter is hit.
StageOutcome execute_stage(const WorkflowGraph& graph, const Stage& stage,
                           const SlotMap& inputs, const EngineContext& ctx);

struct ExecutionResult {
    std::string answer;
    std::vector<NodeTranscript> transcripts;
    bool truncated = false;
    bool answer_from_fallback = false;  // no Format node executed
    SlotMap final_outputs;
    std::chrono::milliseconds total_wall_time{0};
};

/// Full-graph execution: runs the plan in order, threading each stage's
/// outputs into the next, and extracts the answer from the last executed
/// Format node (or falls back to the final stage's primary slot).
ExecutionResult execute_workflow(const WorkflowGraph& graph, const std::string& task,
                                 Backend& backend, const EngineContext& base_ctx);

}  // namespace flowcanvas
