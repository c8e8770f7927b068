#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowcanvas/backend.hpp"
#include "flowcanvas/graph.hpp"
#include "flowcanvas/sandbox.hpp"

namespace flowcanvas {

using SlotMap = std::map<std::string, std::string>;

struct OperatorSpec {
    OperatorKind kind;
    std::vector<std::string> input_slots;
    std::vector<std::string> output_slots;
    std::string role_line;         // one-line description used in the library text
    std::string default_template;  // response-format instructions for the backend
};

/// Exactly one spec per kind.
const OperatorSpec& operator_spec(OperatorKind kind);

/// Deterministic operator-library description (d_lib); byte-identical across
/// calls as it is embedded in the initial observation.
std::string describe_library();

/// The slot name shown as [Output] in canvas feedback.
const std::string& primary_slot(OperatorKind kind);

struct RunOutcome {
    SlotMap slots;
    std::string rendered_request;   // user message sent to the backend, if any
    std::string raw_response;       // backend text, empty for mechanical operators
    bool backend_called = false;
    bool parse_fallback = false;    // response lacked the labeled structure
    std::vector<std::string> warnings;
    std::optional<SandboxResult> sandbox;  // Programmer/Test code execution
    std::chrono::milliseconds wall_time{0};
};

/// Runs one operator node: composes the backend message from the default
/// template, the node prompt, the task and the inbound slots; parses the
/// response into the spec's output slots. Programmer and Test additionally
/// execute extracted code in the sandbox. ScEnsemble resolves by mechanical
/// majority vote; Test resolves mechanically when code and a "tests" slot
/// are present.
RunOutcome run_operator(const NodeAttr& node, const SlotMap& inputs, const std::string& task,
                        Backend& backend, const SandboxConfig& sandbox_cfg,
                        double temperature = 0.0);

/// Labeled-section extraction: returns the text following "<label>:" up to
/// the next known label or end of text. Case-insensitive on the label.
std::optional<std::string> extract_section(const std::string& text, const std::string& label);

/// First fenced code block, or the whole text when no fence is present.
std::string extract_code(const std::string& text);

/// Majority vote with first-occurrence tie-break over exact duplicates.
std::string majority_vote(const std::vector<std::string>& candidates);

}  // namespace flowcanvas
