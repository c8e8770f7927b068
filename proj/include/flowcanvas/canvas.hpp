#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowcanvas/action.hpp"
#include "flowcanvas/backend.hpp"
#include "flowcanvas/engine.hpp"
#include "flowcanvas/graph.hpp"
#include "flowcanvas/reward.hpp"
#include "flowcanvas/sandbox.hpp"

namespace flowcanvas {

enum class Phase { BUILDING, AWAITING_PROMPT, FINISHED };

const char* phase_name(Phase phase);

struct EpisodeLimits {
    int max_rounds = 20;
    /// Context budget in tokens, approximated as 4 characters per token when
    /// no tokenizer is supplied.
    int max_context_tokens = 16384;
    std::optional<std::uint64_t> hint_seed;  // randomized checker hints when set
};

/// Feedback wire format, rendered as " | "-joined bracketed segments:
///   [Status]: s   (omitted when empty)
///   [Output]: o   (optional)
///   [Current DSL]: dsl
///   [NEXT]: hint  (optional)
///   [BLOCK_FINISH]=b (optional)
struct FeedbackMessage {
    std::string status;
    std::string current_dsl;
    std::optional<std::string> output;
    std::optional<std::string> next_hint;
    std::optional<int> block_finish;
    std::string raw;
};

std::string render_feedback(const FeedbackMessage& msg);

struct TurnEntry {
    std::string think;
    std::string action_raw;
    std::string feedback_raw;
};

struct CanvasState {
    Phase phase = Phase::BUILDING;
    WorkflowGraph graph;
    std::vector<NodeId> pending;  // FIFO queue of nodes awaiting prompts
    int turn_index = 0;
    std::vector<TurnEntry> history;
    bool truncated = false;
    SlotMap last_outputs;  // outputs of the most recently completed stage
    bool last_checker_failed = false;
};

/// The default action-format template (a_tmpl) appended to the initial
/// observation.
std::string default_action_template();

/// H_0 = system prompt with the task substituted + operator-library
/// description + action template. An empty library description drops the
/// operator section and records a warning.
std::string initial_observation(const std::string& task, const std::string& library_description,
                                const std::string& action_template,
                                std::vector<std::string>* warnings = nullptr);

/// The canvas environment: holds the task, limits and execution services;
/// step() is a pure transition over CanvasState so every intermediate state
/// can be kept for replay. Newly completed stages execute eagerly so feedback
/// carries real outputs.
class Canvas {
  public:
    struct Setup {
        std::string task;
        EpisodeLimits limits;
        Backend* backend = nullptr;
        SandboxConfig sandbox;
        std::string tests_text;  // test suite for Test nodes, may be empty
        EngineLimits engine_limits;
        double executor_temperature = 0.0;
    };

    explicit Canvas(Setup setup) : setup_(std::move(setup)) {}

    CanvasState initial_state() const { return CanvasState{}; }

    struct StepResult {
        CanvasState state;
        FeedbackMessage feedback;
    };

    /// One turn. Phase errors and edit failures become repair feedback, never
    /// exceptions; a blocked finish consumes a round; exceeding max_rounds
    /// flips the state to FINISHED with the truncation flag.
    StepResult step(const CanvasState& state, const ActionEnvelope& envelope,
                    const RewardProfile& profile) const;

    /// Consumes a round for a turn that failed to parse.
    StepResult step_invalid(const CanvasState& state, const std::string& raw_turn,
                            const std::string& reason, const RewardProfile& profile) const;

    /// Rendered interaction history (the policy observation), capped at the
    /// context limit by dropping the oldest turns, never the system prompt.
    std::string render_history(const CanvasState& state) const;

    std::string initial_observation_text() const;

    const Setup& setup() const { return setup_; }

  private:
    StepResult finish_turn(CanvasState next, const ActionEnvelope& envelope,
                           FeedbackMessage feedback) const;
    std::string visible_dsl(const CanvasState& state) const;
    std::optional<std::string> hint_for(const CanvasState& state,
                                        const RewardProfile& profile) const;

    Setup setup_;
};

}  // namespace flowcanvas
