#include "flowcanvas/graph.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace flowcanvas {

namespace {

struct KindRow {
    OperatorKind kind;
    const char* name;
    OperatorCategory category;
};

constexpr std::array<KindRow, kOperatorCount> kKindTable{{
    {OperatorKind::Plan, "Plan", OperatorCategory::Planning},
    {OperatorKind::Decompose, "Decompose", OperatorCategory::Planning},
    {OperatorKind::Programmer, "Programmer", OperatorCategory::Solving},
    {OperatorKind::Custom, "Custom", OperatorCategory::Solving},
    {OperatorKind::AnswerGenerate, "AnswerGenerate", OperatorCategory::Solving},
    {OperatorKind::Test, "Test", OperatorCategory::Verification},
    {OperatorKind::Review, "Review", OperatorCategory::Verification},
    {OperatorKind::Verify, "Verify", OperatorCategory::Verification},
    {OperatorKind::Revise, "Revise", OperatorCategory::Revision},
    {OperatorKind::ScEnsemble, "ScEnsemble", OperatorCategory::Ensemble},
    {OperatorKind::Aggregate, "Aggregate", OperatorCategory::Ensemble},
    {OperatorKind::Format, "Format", OperatorCategory::Formatting},
}};

const KindRow& row(OperatorKind kind) {
    return kKindTable[static_cast<std::size_t>(kind)];
}

}  // namespace

const char* operator_name(OperatorKind kind) { return row(kind).name; }

OperatorCategory operator_category(OperatorKind kind) { return row(kind).category; }

std::optional<OperatorKind> operator_from_name(const std::string& name) {
    for (const auto& r : kKindTable) {
        if (name == r.name) return r.kind;
    }
    return std::nullopt;
}

std::vector<OperatorKind> all_operator_kinds() {
    std::vector<OperatorKind> kinds;
    kinds.reserve(kOperatorCount);
    for (const auto& r : kKindTable) kinds.push_back(r.kind);
    return kinds;
}

std::string NodeId::str() const {
    std::string out = "node_" + std::to_string(stage_index);
    if (branch) out += "_p" + std::to_string(*branch);
    return out;
}

std::optional<NodeId> NodeId::parse(const std::string& text) {
    if (text.rfind("node_", 0) != 0) return std::nullopt;
    std::string rest = text.substr(5);
    auto digits = [](const std::string& s) {
        return !s.empty() && std::all_of(s.begin(), s.end(),
                                         [](unsigned char c) { return std::isdigit(c); });
    };
    NodeId id;
    auto sep = rest.find("_p");
    if (sep == std::string::npos) {
        if (!digits(rest)) return std::nullopt;
        id.stage_index = std::stoi(rest);
        return id;
    }
    std::string stage = rest.substr(0, sep);
    std::string branch = rest.substr(sep + 2);
    if (!digits(stage) || !digits(branch)) return std::nullopt;
    id.stage_index = std::stoi(stage);
    id.branch = std::stoi(branch);
    return id;
}

bool operator==(const LoopStage& a, const LoopStage& b) {
    return a.max_iter == b.max_iter && a.body == b.body;
}

bool operator==(const Stage& a, const Stage& b) {
    return std::visit(
        [&](const auto& lhs) -> bool {
            using T = std::decay_t<decltype(lhs)>;
            const T* rhs = std::get_if<T>(&b);
            return rhs && lhs == *rhs;
        },
        a);
}

const NodeAttr* WorkflowGraph::find(const NodeId& id) const {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
}

namespace {

void collect_stage_ids(const Stage& stage, std::vector<NodeId>& out) {
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, SequentialStage>) {
                out.push_back(s.node);
            } else if constexpr (std::is_same_v<T, ParallelStage>) {
                for (const auto& n : s.branches) out.push_back(n);
            } else if constexpr (std::is_same_v<T, ConditionalStage>) {
                out.push_back(s.condition);
                out.push_back(s.true_branch);
                if (s.false_branch) out.push_back(*s.false_branch);
            } else {
                for (const auto& inner : s.body) collect_stage_ids(inner, out);
            }
        },
        stage);
}

bool stage_contains(const Stage& stage, const NodeId& id) {
    std::vector<NodeId> ids;
    collect_stage_ids(stage, ids);
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

void require_node(const WorkflowGraph& g, const NodeId& id) {
    if (!g.find(id)) {
        throw GraphError(GraphErrorCode::UnknownNode, "unknown node " + id.str());
    }
}

}  // namespace

EditResult apply_edit(const WorkflowGraph& graph, const GraphEdit& edit) {
    EditResult res{graph, {}};
    WorkflowGraph& g = res.graph;

    std::visit(
        [&](const auto& e) {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, AddEdit>) {
                NodeId id{g.next_stage_index, std::nullopt};
                g.nodes[id] = NodeAttr{e.op, {}, std::nullopt};
                g.stages.push_back(SequentialStage{id});
                g.next_stage_index++;
                res.created.push_back(id);
            } else if constexpr (std::is_same_v<T, AddParallelEdit>) {
                if (e.ops.size() < 2) {
                    throw GraphError(GraphErrorCode::EmptyParallel,
                                     "parallel needs at least 2 branches");
                }
                ParallelStage stage;
                for (std::size_t j = 0; j < e.ops.size(); ++j) {
                    NodeId id{g.next_stage_index, static_cast<int>(j)};
                    g.nodes[id] = NodeAttr{e.ops[j], {}, std::nullopt};
                    stage.branches.push_back(id);
                    res.created.push_back(id);
                }
                g.stages.push_back(stage);
                g.next_stage_index++;
            } else if constexpr (std::is_same_v<T, AddConditionalEdit>) {
                ConditionalStage stage;
                stage.condition = NodeId{g.next_stage_index, std::nullopt};
                g.nodes[stage.condition] = NodeAttr{e.condition, {}, std::nullopt};
                res.created.push_back(stage.condition);
                stage.true_branch = NodeId{g.next_stage_index, 0};
                g.nodes[stage.true_branch] = NodeAttr{e.true_branch, {}, std::nullopt};
                res.created.push_back(stage.true_branch);
                if (e.false_branch) {
                    stage.false_branch = NodeId{g.next_stage_index, 1};
                    g.nodes[*stage.false_branch] = NodeAttr{*e.false_branch, {}, std::nullopt};
                    res.created.push_back(*stage.false_branch);
                }
                g.stages.push_back(stage);
                g.next_stage_index++;
            } else if constexpr (std::is_same_v<T, AddLoopEdit>) {
                if (e.body.empty()) {
                    throw GraphError(GraphErrorCode::LoopWithoutBody, "loop body is empty");
                }
                if (e.max_iter < 1) {
                    throw GraphError(GraphErrorCode::InvalidEdit, "loop max_iter must be >= 1");
                }
                LoopStage stage;
                stage.max_iter = e.max_iter;
                for (std::size_t j = 0; j < e.body.size(); ++j) {
                    NodeId id{g.next_stage_index, static_cast<int>(j)};
                    g.nodes[id] = NodeAttr{e.body[j], {}, std::nullopt};
                    stage.body.push_back(SequentialStage{id});
                    res.created.push_back(id);
                }
                g.stages.push_back(stage);
                g.next_stage_index++;
            } else if constexpr (std::is_same_v<T, DeleteEdit>) {
                require_node(g, e.target);
                for (std::size_t i = 0; i < g.stages.size(); ++i) {
                    if (!stage_contains(g.stages[i], e.target)) continue;
                    Stage& stage = g.stages[i];
                    if (auto* par = std::get_if<ParallelStage>(&stage)) {
                        auto& br = par->branches;
                        br.erase(std::remove(br.begin(), br.end(), e.target), br.end());
                        g.nodes.erase(e.target);
                        // A one-branch parallel collapses to a plain stage.
                        if (br.size() == 1) {
                            stage = SequentialStage{br.front()};
                        } else if (br.empty()) {
                            g.stages.erase(g.stages.begin() + static_cast<long>(i));
                        }
                    } else {
                        std::vector<NodeId> ids;
                        collect_stage_ids(stage, ids);
                        for (const auto& id : ids) g.nodes.erase(id);
                        g.stages.erase(g.stages.begin() + static_cast<long>(i));
                    }
                    break;
                }
            } else if constexpr (std::is_same_v<T, ModifyEdit>) {
                require_node(g, e.target);
                g.nodes[e.target].op = e.new_op;
            } else if constexpr (std::is_same_v<T, SetPromptEdit>) {
                require_node(g, e.target);
                g.nodes[e.target].prompt = e.prompt;
            }
        },
        edit);
    return res;
}

std::vector<Violation> validate_graph(const WorkflowGraph& graph) {
    std::vector<Violation> out;
    std::set<NodeId> seen;
    std::vector<NodeId> referenced;
    for (const auto& stage : graph.stages) collect_stage_ids(stage, referenced);

    for (const auto& id : referenced) {
        if (!graph.find(id)) out.push_back({"DanglingReference", id.str()});
        if (!seen.insert(id).second) out.push_back({"DuplicateId", id.str()});
    }
    for (const auto& [id, attr] : graph.nodes) {
        (void)attr;
        if (!seen.count(id)) out.push_back({"OrphanNode", id.str()});
    }

    // Shape checks on composite stages (recursing into loop bodies).
    auto check_shape = [&](const Stage& stage, auto&& self) -> void {
        if (const auto* par = std::get_if<ParallelStage>(&stage)) {
            if (par->branches.size() < 2) out.push_back({"DegenerateParallel", ""});
        } else if (const auto* loop = std::get_if<LoopStage>(&stage)) {
            if (loop->body.empty()) out.push_back({"LoopWithoutBody", ""});
            if (loop->max_iter < 1) out.push_back({"NonPositiveLoopBound", ""});
            for (const auto& inner : loop->body) self(inner, self);
        }
    };
    for (const auto& stage : graph.stages) check_shape(stage, check_shape);
    return out;
}

namespace {

bool stage_has_control(const Stage& stage) {
    if (std::holds_alternative<ParallelStage>(stage)) return true;
    if (std::holds_alternative<ConditionalStage>(stage)) return true;
    if (std::holds_alternative<LoopStage>(stage)) return true;
    return false;
}

}  // namespace

CheckReport structural_checks(const WorkflowGraph& graph, int min_operators) {
    CheckReport report;
    report.node_count = static_cast<int>(graph.node_count());
    for (const auto& [id, attr] : graph.nodes) {
        (void)id;
        if (is_checker(attr.op)) report.has_checker = true;
    }
    if (!graph.stages.empty()) {
        std::vector<NodeId> last_ids;
        collect_stage_ids(graph.stages.back(), last_ids);
        for (const auto& id : last_ids) {
            const NodeAttr* attr = graph.find(id);
            if (attr && attr->op == OperatorKind::Format) report.has_format = true;
        }
    }
    report.has_min_operators = report.node_count >= min_operators;
    for (const auto& stage : graph.stages) {
        if (stage_has_control(stage)) report.has_control = true;
    }
    return report;
}

std::vector<GraphEdit> canonical_edit_sequence(const WorkflowGraph& target) {
    std::vector<GraphEdit> edits;
    auto op_of = [&](const NodeId& id) { return target.nodes.at(id).op; };

    for (const auto& stage : target.stages) {
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SequentialStage>) {
                    edits.push_back(AddEdit{op_of(s.node)});
                } else if constexpr (std::is_same_v<T, ParallelStage>) {
                    AddParallelEdit e;
                    for (const auto& n : s.branches) e.ops.push_back(op_of(n));
                    edits.push_back(e);
                } else if constexpr (std::is_same_v<T, ConditionalStage>) {
                    AddConditionalEdit e;
                    e.condition = op_of(s.condition);
                    e.true_branch = op_of(s.true_branch);
                    if (s.false_branch) e.false_branch = op_of(*s.false_branch);
                    edits.push_back(e);
                } else {
                    AddLoopEdit e;
                    e.max_iter = s.max_iter;
                    for (const auto& inner : s.body) {
                        // Canonical loop bodies are flat operator lists.
                        e.body.push_back(op_of(std::get<SequentialStage>(inner).node));
                    }
                    edits.push_back(e);
                }
            },
            stage);
    }
    for (const auto& [id, attr] : target.nodes) {
        if (attr.prompt) edits.push_back(SetPromptEdit{id, *attr.prompt});
    }
    return edits;
}

}  // namespace flowcanvas
