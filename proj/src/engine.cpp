#include "flowcanvas/engine.hpp"

#include <algorithm>
#include <future>
#include <sstream>

#include <json.hpp>

namespace flowcanvas {

namespace {

std::string collapse_ws(const std::string& s, std::size_t limit = 160) {
    std::string out;
    bool in_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(static_cast<char>(c));
    }
    if (out.size() > limit) out = out.substr(0, limit) + "...";
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Single-line rendering of one node's result for feedback text.
std::string node_summary(OperatorKind op, const RunOutcome& outcome) {
    auto slot = [&](const std::string& name) -> std::string {
        auto it = outcome.slots.find(name);
        return it == outcome.slots.end() ? "" : it->second;
    };
    switch (op) {
        case OperatorKind::Verify:
        case OperatorKind::Review:
            return "is_correct=" + collapse_ws(slot("is_correct"));
        case OperatorKind::Programmer: {
            std::string out = collapse_ws(slot("output"));
            return out.empty() ? "CODE_GENERATED" : out;
        }
        case OperatorKind::Test: {
            std::string verdict = slot("pass_fail");
            std::string fraction = slot("pass_fraction");
            if (fraction.empty()) return verdict;
            return verdict + " (" + fraction + " public tests passed)";
        }
        default: {
            std::string primary = collapse_ws(slot(primary_slot(op)));
            return primary.empty() ? "(no output)" : primary;
        }
    }
}

bool past_deadline(const EngineContext& ctx) {
    return ctx.deadline && std::chrono::steady_clock::now() >= *ctx.deadline;
}

struct NodeRun {
    RunOutcome outcome;
    NodeTranscript transcript;
};

NodeRun run_node(const WorkflowGraph& graph, const NodeId& id, SlotMap inputs,
                 const EngineContext& ctx, int iteration) {
    const NodeAttr& attr = graph.nodes.at(id);
    if (attr.op == OperatorKind::Test && !ctx.tests_text.empty() && !inputs.count("tests")) {
        inputs["tests"] = ctx.tests_text;
    }

    // Per-node budget: the smaller of the configured sandbox limit, the
    // per-node cap, and whatever remains of the overall deadline.
    SandboxConfig sandbox = ctx.sandbox;
    sandbox.limit = std::min(sandbox.limit, ctx.limits.per_node);
    if (ctx.deadline) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            *ctx.deadline - std::chrono::steady_clock::now());
        sandbox.limit = std::min(sandbox.limit, std::max(remaining,
                                                         std::chrono::milliseconds(1)));
    }

    NodeRun run;
    run.transcript.node_id = id.str();
    run.transcript.op = operator_name(attr.op);
    run.transcript.iteration = iteration;
    run.transcript.prompt = attr.prompt.value_or("");

    try {
        run.outcome = run_operator(attr, inputs, ctx.task, *ctx.backend, sandbox,
                                   ctx.temperature);
    } catch (const std::exception& e) {
        run.transcript.errored = true;
        run.transcript.warnings.push_back(e.what());
        run.outcome.slots.clear();
        return run;
    }
    run.transcript.request = run.outcome.rendered_request;
    run.transcript.response = run.outcome.raw_response;
    run.transcript.sandbox = run.outcome.sandbox;
    run.transcript.outputs = run.outcome.slots;
    run.transcript.warnings = run.outcome.warnings;
    run.transcript.wall_time = run.outcome.wall_time;
    return run;
}

}  // namespace

ExecutionPlan plan_schedule(const WorkflowGraph& graph) {
    if (graph.empty()) throw InvalidGraph("EmptyWorkflow");
    auto violations = validate_graph(graph);
    if (!violations.empty()) throw InvalidGraph(violations.front().str());

    ExecutionPlan plan;
    auto lower_stage = [](const Stage& stage, auto&& self) -> PlanStep {
        return std::visit(
            [&](const auto& s) -> PlanStep {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SequentialStage>) {
                    return RunNodeStep{s.node};
                } else if constexpr (std::is_same_v<T, ParallelStage>) {
                    return ForkJoinStep{s.branches};
                } else if constexpr (std::is_same_v<T, ConditionalStage>) {
                    return BranchStep{s.condition, s.true_branch, s.false_branch};
                } else {
                    BoundedLoopStep step;
                    step.max_iter = s.max_iter;
                    for (const auto& inner : s.body) step.body.push_back(self(inner, self));
                    return step;
                }
            },
            stage);
    };
    for (const auto& stage : graph.stages) plan.steps.push_back(lower_stage(stage, lower_stage));
    return plan;
}

ConditionEval evaluate_condition(const SlotMap& condition_output) {
    auto classify = [](const std::string& value) -> std::optional<bool> {
        // Token scan over the normalized value: "failed"/"false"/"fail" mean
        // the checker flagged a problem.
        std::string low = lower(value);
        std::string token;
        std::vector<std::string> tokens;
        for (unsigned char c : low) {
            if (std::isalpha(c)) {
                token.push_back(static_cast<char>(c));
            } else if (!token.empty()) {
                tokens.push_back(token);
                token.clear();
            }
        }
        if (!token.empty()) tokens.push_back(token);
        for (const auto& t : tokens) {
            if (t == "fail" || t == "failed" || t == "false") return true;
            if (t == "pass" || t == "passed" || t == "true") return false;
        }
        return std::nullopt;
    };

    for (const char* key : {"pass_fail", "is_correct"}) {
        auto it = condition_output.find(key);
        if (it == condition_output.end()) continue;
        auto verdict = classify(it->second);
        if (verdict) return {*verdict, true};
    }
    return {true, false};  // unknown: safest is to re-check via the repair path
}

StageOutcome execute_stage(const WorkflowGraph& graph, const Stage& stage,
                           const SlotMap& inputs, const EngineContext& ctx) {
    StageOutcome out;
    if (past_deadline(ctx)) {
        out.had_error = true;
        out.summary = "execution budget exhausted";
        return out;
    }

    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SequentialStage>) {
                auto run = run_node(graph, s.node, inputs, ctx, 0);
                out.outputs = run.outcome.slots;
                out.summary = run.transcript.errored
                                  ? "execution failed: " + run.transcript.warnings.front()
                                  : node_summary(graph.nodes.at(s.node).op, run.outcome);
                out.had_error = run.transcript.errored;
                if (is_checker(graph.nodes.at(s.node).op)) {
                    out.checker_failed = evaluate_condition(run.outcome.slots).repair;
                }
                out.transcripts.push_back(std::move(run.transcript));
            } else if constexpr (std::is_same_v<T, ParallelStage>) {
                std::vector<NodeRun> runs(s.branches.size());
                if (ctx.backend && ctx.backend->serial_only()) {
                    for (std::size_t j = 0; j < s.branches.size(); ++j) {
                        runs[j] = run_node(graph, s.branches[j], inputs, ctx, 0);
                    }
                } else {
                    std::vector<std::future<NodeRun>> futures;
                    futures.reserve(s.branches.size());
                    for (std::size_t j = 0; j < s.branches.size(); ++j) {
                        futures.push_back(std::async(std::launch::async, [&, j] {
                            return run_node(graph, s.branches[j], inputs, ctx, 0);
                        }));
                    }
                    for (std::size_t j = 0; j < s.branches.size(); ++j) {
                        runs[j] = futures[j].get();  // join by branch index
                    }
                }
                nlohmann::json primaries = nlohmann::json::array();
                std::string joined;
                for (std::size_t j = 0; j < s.branches.size(); ++j) {
                    const auto op = graph.nodes.at(s.branches[j]).op;
                    for (const auto& [k, v] : runs[j].outcome.slots) {
                        out.outputs["p" + std::to_string(j) + "_" + k] = v;
                    }
                    std::string primary;
                    auto it = runs[j].outcome.slots.find(primary_slot(op));
                    if (it != runs[j].outcome.slots.end()) primary = it->second;
                    primaries.push_back(primary);
                    if (j) joined += "; ";
                    joined += runs[j].transcript.errored ? "(error)" : collapse_ws(primary);
                    out.had_error = out.had_error || runs[j].transcript.errored;
                    out.transcripts.push_back(std::move(runs[j].transcript));
                }
                out.outputs["solutions"] = primaries.dump();
                out.summary = joined;
            } else if constexpr (std::is_same_v<T, ConditionalStage>) {
                auto cond = run_node(graph, s.condition, inputs, ctx, 0);
                auto eval = evaluate_condition(cond.outcome.slots);
                std::string cond_summary =
                    node_summary(graph.nodes.at(s.condition).op, cond.outcome);
                out.transcripts.push_back(std::move(cond.transcript));
                std::optional<NodeId> branch;
                if (eval.repair) {
                    branch = s.true_branch;
                } else if (s.false_branch) {
                    branch = *s.false_branch;
                }
                if (branch) {
                    SlotMap branch_inputs = inputs;
                    for (const auto& [k, v] : cond.outcome.slots) branch_inputs[k] = v;
                    auto run = run_node(graph, *branch, branch_inputs, ctx, 0);
                    out.outputs = run.outcome.slots;
                    out.summary = cond_summary + "; " +
                                  (run.transcript.errored
                                       ? "(error)"
                                       : node_summary(graph.nodes.at(*branch).op, run.outcome));
                    out.had_error = run.transcript.errored;
                    out.transcripts.push_back(std::move(run.transcript));
                } else {
                    out.outputs = cond.outcome.slots;
                    out.summary = cond_summary + "; done";
                }
                out.checker_failed = eval.repair;
            } else {
                SlotMap carry = inputs;
                int iterations = 0;
                for (int iter = 0; iter < s.max_iter; ++iter) {
                    if (past_deadline(ctx)) {
                        out.had_error = true;
                        break;
                    }
                    iterations++;
                    std::optional<ConditionEval> last_checker;
                    for (const auto& inner : s.body) {
                        auto inner_out = execute_stage(graph, inner, carry, ctx);
                        carry = inner_out.outputs;
                        out.had_error = out.had_error || inner_out.had_error;
                        for (auto& t : inner_out.transcripts) {
                            t.iteration = iter;
                            out.transcripts.push_back(std::move(t));
                        }
                        std::vector<NodeId> ids;
                        // Track the most recent checker verdict inside the body.
                        if (const auto* seq = std::get_if<SequentialStage>(&inner)) {
                            if (is_checker(graph.nodes.at(seq->node).op)) {
                                last_checker = evaluate_condition(carry);
                            }
                        }
                        (void)ids;
                    }
                    out.outputs = carry;
                    if (last_checker && last_checker->parsed && !last_checker->repair) {
                        out.checker_failed = false;
                        break;
                    }
                    if (last_checker) out.checker_failed = last_checker->repair;
                }
                std::string last;
                if (!out.transcripts.empty()) {
                    const auto& t = out.transcripts.back();
                    auto kind = operator_from_name(t.op);
                    if (kind && out.outputs.count(primary_slot(*kind))) {
                        last = collapse_ws(out.outputs.at(primary_slot(*kind)));
                    }
                }
                out.summary = "loop ran " + std::to_string(iterations) + " iteration" +
                              (iterations == 1 ? "" : "s") + (last.empty() ? "" : "; " + last);
            }
        },
        stage);
    return out;
}

ExecutionResult execute_workflow(const WorkflowGraph& graph, const std::string& task,
                                 Backend& backend, const EngineContext& base_ctx) {
    auto plan = plan_schedule(graph);  // validates; throws InvalidGraph
    (void)plan;

    EngineContext ctx = base_ctx;
    ctx.task = task;
    ctx.backend = &backend;
    auto start = std::chrono::steady_clock::now();
    if (!ctx.deadline) ctx.deadline = start + ctx.limits.total;

    ExecutionResult result;
    SlotMap carry;
    std::string format_answer;
    bool format_seen = false;

    for (const auto& stage : graph.stages) {
        if (past_deadline(ctx)) {
            result.truncated = true;
            break;
        }
        auto outcome = execute_stage(graph, stage, carry, ctx);
        carry = outcome.outputs;
        for (auto& t : outcome.transcripts) {
            auto kind = operator_from_name(t.op);
            if (kind && *kind == OperatorKind::Format && t.outputs.count("final_answer")) {
                format_answer = t.outputs.at("final_answer");
                format_seen = true;
            }
            result.transcripts.push_back(std::move(t));
        }
        if (outcome.had_error && past_deadline(ctx)) {
            result.truncated = true;
            break;
        }
    }

    result.final_outputs = carry;
    if (format_seen) {
        result.answer = format_answer;
    } else {
        result.answer_from_fallback = true;
        if (!result.transcripts.empty()) {
            // Last node's primary output slot.
            for (auto it = result.transcripts.rbegin(); it != result.transcripts.rend(); ++it) {
                auto kind = operator_from_name(it->op);
                if (!kind) continue;
                auto slot = it->outputs.find(primary_slot(*kind));
                if (slot != it->outputs.end() && !slot->second.empty()) {
                    result.answer = slot->second;
                    break;
                }
            }
        }
    }
    result.total_wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return result;
}

}  // namespace flowcanvas
