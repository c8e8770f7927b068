#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace flowcanvas {

/// The twelve operator kinds available to a workflow, grouped into six
/// categories. Names are canonical and appear verbatim in the DSL and in
/// turn wire formats.
enum class OperatorKind {
    Plan,
    Decompose,
    Programmer,
    Custom,
    AnswerGenerate,
    Test,
    Review,
    Verify,
    Revise,
    ScEnsemble,
    Aggregate,
    Format,
};

inline constexpr int kOperatorCount = 12;

enum class OperatorCategory {
    Planning,
    Solving,
    Verification,
    Revision,
    Ensemble,
    Formatting,
};

const char* operator_name(OperatorKind kind);
OperatorCategory operator_category(OperatorKind kind);
std::optional<OperatorKind> operator_from_name(const std::string& name);
std::vector<OperatorKind> all_operator_kinds();

inline bool is_checker(OperatorKind k) {
    return operator_category(k) == OperatorCategory::Verification;
}

/// Node identifier: stage index plus an optional member slot. Renders as
/// "node_<k>" for plain nodes and "node_<k>_p<j>" for members of composite
/// stages (parallel branches, conditional branch operators, loop body slots).
struct NodeId {
    int stage_index = 0;
    std::optional<int> branch;

    std::string str() const;
    static std::optional<NodeId> parse(const std::string& text);

    friend bool operator==(const NodeId&, const NodeId&) = default;
    friend auto operator<=>(const NodeId& a, const NodeId& b) {
        if (auto c = a.stage_index <=> b.stage_index; c != 0) return c;
        return a.branch.value_or(-1) <=> b.branch.value_or(-1);
    }
};

struct NodeAttr {
    OperatorKind op;
    std::map<std::string, std::string> params;
    std::optional<std::string> prompt;

    friend bool operator==(const NodeAttr&, const NodeAttr&) = default;
};

struct SequentialStage {
    NodeId node;
    friend bool operator==(const SequentialStage&, const SequentialStage&) = default;
};

struct ParallelStage {
    std::vector<NodeId> branches;
    friend bool operator==(const ParallelStage&, const ParallelStage&) = default;
};

/// false_branch is empty for the "done" marker (no-op when the checker passes).
struct ConditionalStage {
    NodeId condition;
    NodeId true_branch;
    std::optional<NodeId> false_branch;
    friend bool operator==(const ConditionalStage&, const ConditionalStage&) = default;
};

struct LoopStage;

using Stage = std::variant<SequentialStage, ParallelStage, ConditionalStage, LoopStage>;

struct LoopStage {
    std::vector<Stage> body;
    int max_iter = 1;
    friend bool operator==(const LoopStage&, const LoopStage&);
};

bool operator==(const Stage& a, const Stage& b);

enum class GraphErrorCode {
    UnknownNode,
    InvalidOperator,
    EmptyParallel,
    LoopWithoutBody,
    InvalidEdit,
};

class GraphError : public std::runtime_error {
  public:
    GraphError(GraphErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    GraphErrorCode code() const { return code_; }

  private:
    GraphErrorCode code_;
};

/// One canvas edit. Exactly one variant per edit.
struct AddEdit {
    OperatorKind op;
};
struct DeleteEdit {
    NodeId target;
};
struct ModifyEdit {
    NodeId target;
    OperatorKind new_op;
};
struct SetPromptEdit {
    NodeId target;
    std::string prompt;
};
struct AddParallelEdit {
    std::vector<OperatorKind> ops;
};
struct AddConditionalEdit {
    OperatorKind condition;
    OperatorKind true_branch;
    std::optional<OperatorKind> false_branch;  // nullopt = "done"
};
struct AddLoopEdit {
    std::vector<OperatorKind> body;
    int max_iter = 1;
};

using GraphEdit = std::variant<AddEdit, DeleteEdit, ModifyEdit, SetPromptEdit,
                               AddParallelEdit, AddConditionalEdit, AddLoopEdit>;

/// The workflow graph: an attribute map plus an ordered stage list. Stage
/// order is the execution order; parallel fan-out/fan-in and loop back-edges
/// are implied by the stage variants. Graphs are immutable values — edits
/// return fresh graphs so every intermediate state can be kept for replay.
struct WorkflowGraph {
    std::map<NodeId, NodeAttr> nodes;
    std::vector<Stage> stages;
    // Stage indices are assigned at creation and never reused after Delete,
    // keeping feedback text stable across edits.
    int next_stage_index = 1;

    bool empty() const { return stages.empty(); }
    std::size_t node_count() const { return nodes.size(); }
    const NodeAttr* find(const NodeId& id) const;

    friend bool operator==(const WorkflowGraph& a, const WorkflowGraph& b) {
        return a.nodes == b.nodes && a.stages == b.stages;
    }
};

struct EditResult {
    WorkflowGraph graph;
    std::vector<NodeId> created;
};

/// Applies one edit and returns the updated graph plus any node ids it
/// created. Throws GraphError when the edit's preconditions fail; the input
/// graph is never mutated.
EditResult apply_edit(const WorkflowGraph& graph, const GraphEdit& edit);

struct Violation {
    std::string kind;
    std::string detail;
    std::string str() const { return detail.empty() ? kind : kind + "(" + detail + ")"; }
};

/// Referential-integrity and shape checks. Empty result iff all graph
/// invariants hold.
std::vector<Violation> validate_graph(const WorkflowGraph& graph);

struct CheckReport {
    bool has_checker = false;
    bool has_format = false;
    bool has_min_operators = false;
    bool has_control = false;
    int node_count = 0;
};

/// The four structural skeleton predicates: a verification operator exists,
/// a Format node occupies the final stage, the node count reaches the
/// profile minimum, and at least one control stage is present.
CheckReport structural_checks(const WorkflowGraph& graph, int min_operators);

/// Emits the canonical edit sequence (stage-order adds, then per-node
/// set_prompt) that rebuilds `target` from an empty graph.
std::vector<GraphEdit> canonical_edit_sequence(const WorkflowGraph& target);

}  // namespace flowcanvas
