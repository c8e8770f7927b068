#include "flowcanvas/operators.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include <json.hpp>

namespace flowcanvas {

namespace {

// Labels recognized by extract_section; a section runs until the next label.
const std::array<const char*, 14> kLabels = {
    "approach", "plan",     "sub_problems", "key_insights", "code",
    "output",   "response", "thought",      "answer",       "is_correct",
    "feedback", "revised_solution", "final_answer", "confidence",
};

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Finds "label:" at a line start (case-insensitive); returns npos or the
// offset just past the colon.
std::size_t find_label(const std::string& text, const std::string& label,
                       std::size_t* start_out) {
    std::string low = lower(text);
    std::string needle = lower(label) + ":";
    std::size_t pos = 0;
    while ((pos = low.find(needle, pos)) != std::string::npos) {
        if (pos == 0 || low[pos - 1] == '\n') {
            if (start_out) *start_out = pos;
            return pos + needle.size();
        }
        pos += needle.size();
    }
    return std::string::npos;
}

const std::vector<OperatorSpec>& spec_table() {
    static const std::vector<OperatorSpec> table = [] {
        std::vector<OperatorSpec> t;
        auto add = [&](OperatorKind kind, std::vector<std::string> in,
                       std::vector<std::string> out, std::string role, std::string tmpl) {
            t.push_back({kind, std::move(in), std::move(out), std::move(role), std::move(tmpl)});
        };
        add(OperatorKind::Plan, {"problem"}, {"approach", "plan"},
            "create solution strategy",
            "Respond with two labeled sections:\nApproach: <one-line strategy>\nPlan: <numbered steps>");
        add(OperatorKind::Decompose, {"problem"}, {"sub_problems"},
            "break into sub-problems",
            "Respond with one labeled section:\nSub_problems: <numbered independent sub-problems>");
        add(OperatorKind::Programmer, {"problem", "analysis"}, {"code", "output"},
            "write and execute Python code",
            "Respond with a single fenced Python code block that prints the result.");
        add(OperatorKind::Custom, {"input", "context"}, {"response"},
            "natural language reasoning",
            "Reason concisely. End with:\nAnswer: <your answer>");
        add(OperatorKind::AnswerGenerate, {"input"}, {"thought", "answer"},
            "generate answer with reasoning",
            "Respond with two labeled sections:\nThought: <reasoning>\nAnswer: <answer>");
        add(OperatorKind::Test, {"code", "tests"},
            {"pass_fail", "solution", "pass_fraction", "first_failure"},
            "run test cases",
            "Judge whether the solution passes. Respond with:\nis_correct: <True|False>");
        add(OperatorKind::Review, {"solution"}, {"is_correct", "feedback"},
            "evaluate quality",
            "Critique the solution. Respond with:\nis_correct: <True|False>\nFeedback: <issues or confirmation>");
        add(OperatorKind::Verify, {"answer"}, {"is_correct", "answer"},
            "double-check result",
            "Independently re-derive the result. Respond with:\nis_correct: <True|False>\nAnswer: <the verified answer>");
        add(OperatorKind::Revise, {"solution", "feedback"}, {"revised_solution"},
            "fix issues",
            "Apply the feedback. Respond with:\nRevised_solution: <the corrected solution>");
        add(OperatorKind::ScEnsemble, {"solutions"}, {"selected_solution"},
            "multiple solutions voting",
            "Pick the most consistent candidate. Respond with:\nAnswer: <chosen solution>");
        add(OperatorKind::Aggregate, {"sub_answers"}, {"aggregated"},
            "combine results",
            "Combine the branch results into one answer. End with:\nAnswer: <combined answer>");
        add(OperatorKind::Format, {"solution"}, {"final_answer"},
            "extract concise answer",
            "Output ONLY the final answer, nothing else.");
        return t;
    }();
    return table;
}

const std::map<OperatorKind, std::string>& primary_table() {
    static const std::map<OperatorKind, std::string> table = {
        {OperatorKind::Plan, "approach"},
        {OperatorKind::Decompose, "sub_problems"},
        {OperatorKind::Programmer, "output"},
        {OperatorKind::Custom, "response"},
        {OperatorKind::AnswerGenerate, "answer"},
        {OperatorKind::Test, "pass_fail"},
        {OperatorKind::Review, "is_correct"},
        {OperatorKind::Verify, "is_correct"},
        {OperatorKind::Revise, "revised_solution"},
        {OperatorKind::ScEnsemble, "selected_solution"},
        {OperatorKind::Aggregate, "aggregated"},
        {OperatorKind::Format, "final_answer"},
    };
    return table;
}

std::string first_present(const SlotMap& inputs, std::initializer_list<const char*> keys) {
    for (const char* key : keys) {
        auto it = inputs.find(key);
        if (it != inputs.end() && !it->second.empty()) return it->second;
    }
    return "";
}

// Maps a spec input slot to the inbound slot map, tolerating upstream naming.
std::string resolve_input(const std::string& slot, const SlotMap& inputs,
                          const std::string& task) {
    auto direct = inputs.find(slot);
    if (direct != inputs.end() && !direct->second.empty()) return direct->second;
    if (slot == "problem" || slot == "input") {
        auto v = first_present(inputs, {"sub_problems", "response", "answer"});
        return v.empty() ? task : v;
    }
    if (slot == "analysis") return first_present(inputs, {"plan", "approach", "sub_problems"});
    if (slot == "context") {
        std::string all;
        for (const auto& [k, v] : inputs) {
            if (v.empty()) continue;
            if (!all.empty()) all += "\n";
            all += k + ": " + v;
        }
        return all;
    }
    if (slot == "code") return first_present(inputs, {"solution", "revised_solution"});
    if (slot == "solution" || slot == "answer" || slot == "sub_answers") {
        return first_present(inputs, {"final_answer", "answer", "aggregated", "revised_solution",
                                      "selected_solution", "response", "output", "code",
                                      "solution"});
    }
    if (slot == "feedback") return first_present(inputs, {"first_failure", "feedback"});
    return "";
}

std::vector<std::string> parse_candidates(const std::string& text) {
    // Either a JSON array of strings or one candidate per line.
    auto t = trim(text);
    if (!t.empty() && t.front() == '[') {
        try {
            auto j = nlohmann::json::parse(t);
            if (j.is_array()) {
                std::vector<std::string> out;
                for (const auto& item : j) out.push_back(item.get<std::string>());
                return out;
            }
        } catch (const nlohmann::json::exception&) {
        }
    }
    std::vector<std::string> out;
    std::istringstream in(t);
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) out.push_back(trim(line));
    }
    return out;
}

BackendRequest compose_request(const NodeAttr& node, const SlotMap& inputs,
                               const std::string& task, const OperatorSpec& spec,
                               std::vector<std::string>& warnings, double temperature) {
    std::ostringstream user;
    user << "Task: " << task << "\n";
    if (node.prompt) {
        user << "\nInstruction: " << *node.prompt << "\n";
    }
    bool any_input = false;
    std::ostringstream block;
    for (const auto& slot : spec.input_slots) {
        std::string value = resolve_input(slot, inputs, task);
        if (value.empty()) {
            warnings.push_back("missing input slot '" + slot + "'");
            continue;
        }
        if (slot == "problem" || slot == "input") continue;  // already carried by Task
        block << "\n" << slot << ":\n" << value << "\n";
        any_input = true;
    }
    if (any_input) user << block.str();
    user << "\n" << spec.default_template;

    BackendRequest req;
    req.op_kind = operator_name(node.op);
    req.temperature = temperature;
    req.messages.emplace_back("system", std::string("You are the ") + operator_name(node.op) +
                                            " operator: " + spec.role_line + ".");
    req.messages.emplace_back("user", user.str());
    return req;
}

std::string section_or(const std::string& text, const std::string& label,
                       const std::string& fallback, bool* fell_back = nullptr) {
    auto sec = extract_section(text, label);
    if (sec && !sec->empty()) return *sec;
    if (fell_back) *fell_back = true;
    return fallback;
}

void keep_spec_slots(RunOutcome& outcome, const OperatorSpec& spec) {
    SlotMap pruned;
    for (const auto& slot : spec.output_slots) {
        auto it = outcome.slots.find(slot);
        if (it != outcome.slots.end()) pruned[slot] = it->second;
    }
    outcome.slots = std::move(pruned);
}

}  // namespace

const OperatorSpec& operator_spec(OperatorKind kind) {
    return spec_table()[static_cast<std::size_t>(kind)];
}

const std::string& primary_slot(OperatorKind kind) { return primary_table().at(kind); }

std::string describe_library() {
    std::ostringstream out;
    out << "Available Operators (12 total).";
    for (auto kind : all_operator_kinds()) {
        out << " " << operator_name(kind) << ": " << operator_spec(kind).role_line << ".";
    }
    return out.str();
}

std::optional<std::string> extract_section(const std::string& text, const std::string& label) {
    std::size_t start = 0;
    std::size_t begin = find_label(text, label, &start);
    if (begin == std::string::npos) return std::nullopt;
    std::size_t end = text.size();
    for (const char* other : kLabels) {
        if (lower(label) == other) continue;
        std::size_t other_start = 0;
        std::size_t pos = find_label(text.substr(begin), other, &other_start);
        if (pos != std::string::npos) end = std::min(end, begin + other_start);
    }
    return trim(text.substr(begin, end - begin));
}

std::string extract_code(const std::string& text) {
    std::size_t open = text.find("```");
    if (open == std::string::npos) return trim(text);
    std::size_t body = text.find('\n', open);
    if (body == std::string::npos) return trim(text);
    std::size_t close = text.find("```", body);
    if (close == std::string::npos) return trim(text.substr(body + 1));
    return trim(text.substr(body + 1, close - body - 1));
}

std::string majority_vote(const std::vector<std::string>& candidates) {
    std::string best;
    int best_count = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        int count = 0;
        for (const auto& c : candidates) {
            if (c == candidates[i]) count++;
        }
        if (count > best_count) {  // strict: earlier occurrence wins ties
            best_count = count;
            best = candidates[i];
        }
    }
    return best;
}

RunOutcome run_operator(const NodeAttr& node, const SlotMap& inputs, const std::string& task,
                        Backend& backend, const SandboxConfig& sandbox_cfg,
                        double temperature) {
    const OperatorSpec& spec = operator_spec(node.op);
    RunOutcome outcome;
    auto start = std::chrono::steady_clock::now();

    switch (node.op) {
        case OperatorKind::ScEnsemble: {
            auto candidates = parse_candidates(resolve_input("solutions", inputs, task));
            if (candidates.empty()) outcome.warnings.push_back("missing input slot 'solutions'");
            outcome.slots["selected_solution"] = majority_vote(candidates);
            break;
        }
        case OperatorKind::Test: {
            std::string code = resolve_input("code", inputs, task);
            std::string tests_text = resolve_input("tests", inputs, task);
            if (!code.empty() && !tests_text.empty()) {
                std::vector<TestCase> tests;
                std::istringstream in(tests_text);
                std::string line;
                while (std::getline(in, line)) {
                    if (trim(line).empty()) continue;
                    auto j = nlohmann::json::parse(line);
                    tests.push_back({j.at("stdin").get<std::string>(),
                                     j.at("expected_stdout").get<std::string>()});
                }
                auto result = run_test_suite(code, tests, sandbox_cfg);
                outcome.slots["pass_fail"] = result.all_passed() ? "TEST_PASSED" : "TEST_FAILED";
                outcome.slots["pass_fraction"] =
                    std::to_string(result.passed) + "/" + std::to_string(result.total);
                outcome.slots["first_failure"] = result.first_failure;
                outcome.slots["solution"] = code;
            } else {
                // No runnable suite: fall back to one backend judgement call.
                auto req = compose_request(node, inputs, task, spec, outcome.warnings, temperature);
                outcome.rendered_request = req.messages.back().second;
                auto res = backend.complete(req);
                outcome.backend_called = true;
                outcome.raw_response = res.text;
                std::string verdict =
                    section_or(res.text, "is_correct", trim(res.text), &outcome.parse_fallback);
                std::string low = lower(verdict);
                bool passed = low.find("true") != std::string::npos ||
                              low.find("pass") != std::string::npos;
                outcome.slots["pass_fail"] = passed ? "TEST_PASSED" : "TEST_FAILED";
                outcome.slots["pass_fraction"] = passed ? "1/1" : "0/1";
                outcome.slots["first_failure"] = passed ? "" : verdict;
                outcome.slots["solution"] = code;
            }
            break;
        }
        default: {
            auto req = compose_request(node, inputs, task, spec, outcome.warnings, temperature);
            outcome.rendered_request = req.messages.back().second;
            auto res = backend.complete(req);
            outcome.backend_called = true;
            outcome.raw_response = res.text;
            const std::string& text = res.text;
            switch (node.op) {
                case OperatorKind::Plan:
                    outcome.slots["approach"] =
                        section_or(text, "approach", trim(text), &outcome.parse_fallback);
                    outcome.slots["plan"] = section_or(text, "plan", "");
                    break;
                case OperatorKind::Decompose:
                    outcome.slots["sub_problems"] =
                        section_or(text, "sub_problems", trim(text), &outcome.parse_fallback);
                    break;
                case OperatorKind::Programmer: {
                    std::string code = extract_code(text);
                    outcome.slots["code"] = code;
                    auto run = sandbox_execute(code, "", sandbox_cfg);
                    outcome.sandbox = run;
                    if (run.status == SandboxStatus::Ok) {
                        outcome.slots["output"] = trim(run.stdout_text);
                    } else {
                        outcome.slots["output"] = "";
                        outcome.warnings.push_back("code execution failed: " +
                                                   trim(run.stderr_text).substr(0, 160));
                    }
                    break;
                }
                case OperatorKind::Custom:
                    outcome.slots["response"] =
                        section_or(text, "answer", trim(text), &outcome.parse_fallback);
                    break;
                case OperatorKind::AnswerGenerate:
                    outcome.slots["thought"] = section_or(text, "thought", "");
                    outcome.slots["answer"] =
                        section_or(text, "answer", trim(text), &outcome.parse_fallback);
                    break;
                case OperatorKind::Review:
                    outcome.slots["is_correct"] =
                        section_or(text, "is_correct", trim(text), &outcome.parse_fallback);
                    outcome.slots["feedback"] = section_or(text, "feedback", "");
                    break;
                case OperatorKind::Verify:
                    outcome.slots["is_correct"] =
                        section_or(text, "is_correct", trim(text), &outcome.parse_fallback);
                    outcome.slots["answer"] = section_or(text, "answer", "");
                    break;
                case OperatorKind::Revise:
                    outcome.slots["revised_solution"] =
                        section_or(text, "revised_solution", trim(text), &outcome.parse_fallback);
                    break;
                case OperatorKind::Aggregate:
                    outcome.slots["aggregated"] =
                        section_or(text, "answer", trim(text), &outcome.parse_fallback);
                    break;
                case OperatorKind::Format:
                    outcome.slots["final_answer"] =
                        section_or(text, "final_answer", trim(text), &outcome.parse_fallback);
                    break;
                default:
                    break;
            }
        }
    }

    keep_spec_slots(outcome, spec);
    outcome.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return outcome;
}

}  // namespace flowcanvas
