#include "flowcanvas/canvas.hpp"

#include <random>
#include <sstream>

#include "flowcanvas/dsl.hpp"

namespace flowcanvas {

const char* phase_name(Phase phase) {
    switch (phase) {
        case Phase::BUILDING: return "BUILDING";
        case Phase::AWAITING_PROMPT: return "AWAITING_PROMPT";
        case Phase::FINISHED: return "FINISHED";
    }
    return "?";
}

std::string render_feedback(const FeedbackMessage& msg) {
    std::vector<std::string> segments;
    if (!msg.status.empty()) segments.push_back("[Status]: " + msg.status);
    if (msg.output) segments.push_back("[Output]: " + *msg.output);
    segments.push_back("[Current DSL]: " + msg.current_dsl);
    if (msg.next_hint) segments.push_back("[NEXT]: " + *msg.next_hint);
    if (msg.block_finish) segments.push_back("[BLOCK_FINISH]=" + std::to_string(*msg.block_finish));
    std::string out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i) out += " | ";
        out += segments[i];
    }
    return out;
}

std::string default_action_template() {
    return "Action formats:\n"
           "  <action>add</action><operator>Plan</operator>\n"
           "  <action>set_prompt</action><target>node_1</target><prompt>...</prompt>\n"
           "  <action>delete</action><target>node_1</target>\n"
           "  <action>modify</action><target>node_1</target><operator>Verify</operator>\n"
           "  <action>add</action><structure>parallel</structure><operators>Custom,Custom,Custom</operators>\n"
           "  <action>add</action><structure>conditional</structure><condition>Test</condition>"
           "<true_branch>Programmer</true_branch><false_branch>done</false_branch>\n"
           "  <action>add</action><structure>loop</structure><body>Programmer,Test</body>"
           "<max_iter>3</max_iter>\n"
           "  <action>finish</action>";
}

std::string initial_observation(const std::string& task, const std::string& library_description,
                                const std::string& action_template,
                                std::vector<std::string>* warnings) {
    std::ostringstream out;
    out << "You are building a workflow step by step to solve the problem. In each turn, "
           "output EXACTLY ONE XML action (add/delete/modify/set_prompt/finish or a structure "
           "action: parallel/conditional/loop). Build a reliable workflow rather than a "
           "single-shot answer. Keep thinking brief and let the operators do the computation. "
           "If you use <think>...</think>, you MUST output an <action> tag after it.\n\n";
    if (library_description.empty()) {
        if (warnings) warnings->push_back("empty operator-library description");
    } else {
        out << library_description << "\n\n";
    }
    out << action_template << "\n\n";
    out << "Finish policy: add Format as the last step to extract a concise answer, then "
           "output <action>finish</action>.\n\n";
    out << "Task: " << task;
    return out.str();
}

namespace {

std::string pending_status(const GraphEdit& edit, std::size_t count) {
    if (std::holds_alternative<AddParallelEdit>(edit)) {
        return "Pending - Awaiting Prompts for " + std::to_string(count) + " parallel branches";
    }
    if (std::holds_alternative<AddConditionalEdit>(edit)) {
        return "Pending - Awaiting Prompts for " + std::to_string(count) + " conditional nodes";
    }
    if (std::holds_alternative<AddLoopEdit>(edit)) {
        return "Pending - Awaiting Prompts for " + std::to_string(count) + " loop nodes";
    }
    return "Pending - Awaiting Prompt";
}

bool is_add_edit(const GraphEdit& edit) {
    return std::holds_alternative<AddEdit>(edit) ||
           std::holds_alternative<AddParallelEdit>(edit) ||
           std::holds_alternative<AddConditionalEdit>(edit) ||
           std::holds_alternative<AddLoopEdit>(edit);
}

// The checker kind of the last stage, used for the repair-branch hint.
std::optional<OperatorKind> last_stage_checker(const WorkflowGraph& graph) {
    if (graph.stages.empty()) return std::nullopt;
    const Stage& stage = graph.stages.back();
    if (const auto* seq = std::get_if<SequentialStage>(&stage)) {
        auto op = graph.nodes.at(seq->node).op;
        if (is_checker(op)) return op;
    }
    if (const auto* cond = std::get_if<ConditionalStage>(&stage)) {
        auto op = graph.nodes.at(cond->condition).op;
        if (is_checker(op)) return op;
    }
    return std::nullopt;
}

bool has_unaggregated_parallel(const WorkflowGraph& graph) {
    std::optional<std::size_t> last_parallel;
    for (std::size_t i = 0; i < graph.stages.size(); ++i) {
        if (std::holds_alternative<ParallelStage>(graph.stages[i])) last_parallel = i;
    }
    if (!last_parallel) return false;
    for (std::size_t i = *last_parallel + 1; i < graph.stages.size(); ++i) {
        if (const auto* seq = std::get_if<SequentialStage>(&graph.stages[i])) {
            auto cat = operator_category(graph.nodes.at(seq->node).op);
            if (cat == OperatorCategory::Ensemble) return false;
        }
    }
    return true;
}

bool graph_has_format(const WorkflowGraph& graph) {
    for (const auto& [id, attr] : graph.nodes) {
        (void)id;
        if (attr.op == OperatorKind::Format) return true;
    }
    return false;
}

}  // namespace

std::string Canvas::visible_dsl(const CanvasState& state) const {
    if (state.pending.empty()) return render_dsl(state.graph);
    // Pending nodes always sit in the newest stage; hide it until prompted.
    WorkflowGraph trimmed = state.graph;
    if (!trimmed.stages.empty()) {
        std::vector<NodeId> doomed;
        for (const auto& [id, attr] : trimmed.nodes) {
            (void)attr;
            if (id.stage_index == state.pending.front().stage_index) doomed.push_back(id);
        }
        for (const auto& id : doomed) trimmed.nodes.erase(id);
        trimmed.stages.pop_back();
    }
    return render_dsl(trimmed);
}

std::optional<std::string> Canvas::hint_for(const CanvasState& state,
                                            const RewardProfile& profile) const {
    const WorkflowGraph& g = state.graph;
    auto report = structural_checks(g, profile.min_operators);

    if (state.last_checker_failed) {
        auto checker = last_stage_checker(g);
        if (checker && *checker == OperatorKind::Test) {
            return "ADD:conditional(Test, Programmer, done)";
        }
        return "ADD:conditional(" + std::string(checker ? operator_name(*checker) : "Verify") +
               ", Revise, done)";
    }
    if (has_unaggregated_parallel(g)) return "ADD:Aggregate";
    if (!report.has_checker) {
        if (setup_.limits.hint_seed) {
            std::mt19937_64 rng(*setup_.limits.hint_seed + state.turn_index);
            const char* options[] = {"Verify", "Review", "Test"};
            return std::string("ADD:") + options[rng() % 3];
        }
        return "ADD:Verify";
    }
    if (!graph_has_format(g)) return "ADD:Format";
    if (report.node_count < profile.min_operators) return "ADD:Custom";
    if (profile.require_control && !report.has_control) return "ADD:parallel";
    return "FINISH";
}

Canvas::StepResult Canvas::finish_turn(CanvasState next, const ActionEnvelope& envelope,
                                       FeedbackMessage feedback) const {
    feedback.raw = render_feedback(feedback);
    next.history.push_back(
        TurnEntry{envelope.think.value_or(""), envelope.raw, feedback.raw});
    return {std::move(next), std::move(feedback)};
}

Canvas::StepResult Canvas::step(const CanvasState& state, const ActionEnvelope& envelope,
                                const RewardProfile& profile) const {
    if (state.phase == Phase::FINISHED) {
        FeedbackMessage fb;
        fb.status = "Episode already finished";
        fb.current_dsl = render_dsl(state.graph);
        fb.raw = render_feedback(fb);
        return {state, fb};  // absorbing: no turn consumed, no history growth
    }
    if (state.turn_index >= setup_.limits.max_rounds) {
        CanvasState next = state;
        next.phase = Phase::FINISHED;
        next.truncated = true;
        FeedbackMessage fb;
        fb.status = "Round budget exceeded";
        fb.current_dsl = render_dsl(next.graph);
        fb.raw = render_feedback(fb);
        return {next, fb};
    }

    CanvasState next = state;
    next.turn_index++;
    next.last_checker_failed = state.last_checker_failed;
    FeedbackMessage fb;

    if (std::holds_alternative<FinishAction>(envelope.action)) {
        if (next.phase == Phase::AWAITING_PROMPT) {
            fb.status = "Finish blocked: set_prompt for " + next.pending.front().str() +
                        " first";
            fb.current_dsl = visible_dsl(next);
            fb.next_hint = "SET_PROMPT:" + next.pending.front().str();
            fb.block_finish = 1;
            return finish_turn(std::move(next), envelope, std::move(fb));
        }
        auto report = structural_checks(next.graph, profile.min_operators);
        auto failing = failing_finish_checks(report, profile);
        if (failing.empty()) {
            next.phase = Phase::FINISHED;
            fb.status = "Finished";
            fb.current_dsl = render_dsl(next.graph);
            fb.block_finish = 0;
            return finish_turn(std::move(next), envelope, std::move(fb));
        }
        std::string joined;
        for (std::size_t i = 0; i < failing.size(); ++i) {
            if (i) joined += ", ";
            joined += failing[i];
        }
        fb.status = "Finish blocked: missing " + joined;
        fb.current_dsl = render_dsl(next.graph);
        fb.next_hint = hint_for(next, profile);
        fb.block_finish = 1;
        return finish_turn(std::move(next), envelope, std::move(fb));
    }

    const GraphEdit& edit = std::get<GraphEdit>(envelope.action);

    if (next.phase == Phase::AWAITING_PROMPT) {
        const auto* set_prompt = std::get_if<SetPromptEdit>(&edit);
        if (!set_prompt) {
            fb.status = "Action rejected: awaiting prompt for " + next.pending.front().str();
            fb.current_dsl = visible_dsl(next);
            fb.next_hint = "SET_PROMPT:" + next.pending.front().str();
            return finish_turn(std::move(next), envelope, std::move(fb));
        }
        if (!(set_prompt->target == next.pending.front())) {
            fb.status = "Action rejected: expected prompt for " + next.pending.front().str() +
                        ", got " + set_prompt->target.str();
            fb.current_dsl = visible_dsl(next);
            fb.next_hint = "SET_PROMPT:" + next.pending.front().str();
            return finish_turn(std::move(next), envelope, std::move(fb));
        }
        next.graph = apply_edit(next.graph, edit).graph;
        next.pending.erase(next.pending.begin());
        if (!next.pending.empty()) {
            fb.status = "Pending - Awaiting Prompt";
            fb.current_dsl = visible_dsl(next);
            return finish_turn(std::move(next), envelope, std::move(fb));
        }

        // Stage complete: execute it so the feedback carries real output.
        next.phase = Phase::BUILDING;
        EngineContext ctx;
        ctx.task = setup_.task;
        ctx.backend = setup_.backend;
        ctx.temperature = setup_.executor_temperature;
        ctx.sandbox = setup_.sandbox;
        ctx.tests_text = setup_.tests_text;
        ctx.limits = setup_.engine_limits;
        try {
            auto outcome =
                execute_stage(next.graph, next.graph.stages.back(), state.last_outputs, ctx);
            next.last_outputs = outcome.outputs;
            next.last_checker_failed = outcome.checker_failed;
            fb.output = outcome.summary.empty() ? "(no output)" : outcome.summary;
        } catch (const std::exception& e) {
            fb.status = std::string("Execution failed: ") + e.what();
            next.last_outputs.clear();
            next.last_checker_failed = false;
        }
        fb.current_dsl = render_dsl(next.graph);
        fb.next_hint = hint_for(next, profile);
        auto report = structural_checks(next.graph, profile.min_operators);
        if (finish_allowed(report, profile)) fb.block_finish = 0;
        return finish_turn(std::move(next), envelope, std::move(fb));
    }

    // BUILDING phase.
    if (std::holds_alternative<SetPromptEdit>(edit)) {
        fb.status = "Action rejected: no node awaiting a prompt";
        fb.current_dsl = render_dsl(next.graph);
        fb.next_hint = hint_for(next, profile);
        return finish_turn(std::move(next), envelope, std::move(fb));
    }

    try {
        auto result = apply_edit(next.graph, edit);
        next.graph = result.graph;
        if (is_add_edit(edit)) {
            next.pending = result.created;
            next.phase = Phase::AWAITING_PROMPT;
            fb.status = pending_status(edit, result.created.size());
            fb.current_dsl = visible_dsl(next);
            return finish_turn(std::move(next), envelope, std::move(fb));
        }
        if (const auto* del = std::get_if<DeleteEdit>(&edit)) {
            fb.status = "Deleted " + del->target.str();
        } else if (const auto* mod = std::get_if<ModifyEdit>(&edit)) {
            fb.status = "Modified " + mod->target.str() + " to " + operator_name(mod->new_op);
        }
        fb.current_dsl = render_dsl(next.graph);
        fb.next_hint = hint_for(next, profile);
        auto report = structural_checks(next.graph, profile.min_operators);
        if (finish_allowed(report, profile)) fb.block_finish = 0;
        return finish_turn(std::move(next), envelope, std::move(fb));
    } catch (const GraphError& e) {
        fb.status = std::string("Edit rejected: ") + e.what();
        fb.current_dsl = render_dsl(next.graph);
        fb.next_hint = hint_for(next, profile);
        return finish_turn(std::move(next), envelope, std::move(fb));
    }
}

Canvas::StepResult Canvas::step_invalid(const CanvasState& state, const std::string& raw_turn,
                                        const std::string& reason,
                                        const RewardProfile& profile) const {
    if (state.phase == Phase::FINISHED) {
        FeedbackMessage fb;
        fb.status = "Episode already finished";
        fb.current_dsl = render_dsl(state.graph);
        fb.raw = render_feedback(fb);
        return {state, fb};
    }
    if (state.turn_index >= setup_.limits.max_rounds) {
        CanvasState next = state;
        next.phase = Phase::FINISHED;
        next.truncated = true;
        FeedbackMessage fb;
        fb.status = "Round budget exceeded";
        fb.current_dsl = render_dsl(next.graph);
        fb.raw = render_feedback(fb);
        return {next, fb};
    }
    CanvasState next = state;
    next.turn_index++;
    FeedbackMessage fb;
    fb.status = "Invalid turn: " + reason;
    fb.current_dsl = visible_dsl(next);
    if (next.phase == Phase::AWAITING_PROMPT) {
        fb.next_hint = "SET_PROMPT:" + next.pending.front().str();
    } else {
        fb.next_hint = hint_for(next, profile);
    }
    fb.raw = render_feedback(fb);
    next.history.push_back(TurnEntry{"", raw_turn, fb.raw});
    return {std::move(next), std::move(fb)};
}

std::string Canvas::render_history(const CanvasState& state) const {
    std::string head = initial_observation_text();
    std::vector<std::string> turns;
    turns.reserve(state.history.size());
    for (const auto& t : state.history) {
        turns.push_back("\n\n" + t.action_raw + "\n<feedback>" + t.feedback_raw + "</feedback>");
    }
    std::size_t budget = static_cast<std::size_t>(setup_.limits.max_context_tokens) * 4;
    std::size_t total = head.size();
    for (const auto& t : turns) total += t.size();
    std::size_t first = 0;
    // Drop oldest turns, never the system prompt and never the newest turn.
    while (total > budget && first + 1 < turns.size()) {
        total -= turns[first].size();
        first++;
    }
    std::string out = head;
    if (first > 0) out += "\n\n[earlier turns truncated]";
    for (std::size_t i = first; i < turns.size(); ++i) out += turns[i];
    return out;
}

std::string Canvas::initial_observation_text() const {
    return initial_observation(setup_.task, describe_library(), default_action_template());
}

}  // namespace flowcanvas
