#include "flowcanvas/dsl.hpp"

#include <sstream>

namespace flowcanvas {

namespace {

std::string render_stage(const WorkflowGraph& g, const Stage& stage);

std::string render_stages(const WorkflowGraph& g, const std::vector<Stage>& stages) {
    std::string out;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (i) out += " -> ";
        out += render_stage(g, stages[i]);
    }
    return out;
}

std::string render_stage(const WorkflowGraph& g, const Stage& stage) {
    return std::visit(
        [&](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            auto name = [&](const NodeId& id) -> std::string {
                const NodeAttr* attr = g.find(id);
                return attr ? operator_name(attr->op) : "?";
            };
            if constexpr (std::is_same_v<T, SequentialStage>) {
                return name(s.node);
            } else if constexpr (std::is_same_v<T, ParallelStage>) {
                std::string out = "[";
                for (std::size_t j = 0; j < s.branches.size(); ++j) {
                    if (j) out += ", ";
                    out += name(s.branches[j]);
                }
                return out + "]";
            } else if constexpr (std::is_same_v<T, ConditionalStage>) {
                std::string f = s.false_branch ? name(*s.false_branch) : "done";
                return name(s.condition) + " ? " + name(s.true_branch) + " : " + f;
            } else {
                return "loop{" + render_stages(g, s.body) + ", " +
                       std::to_string(s.max_iter) + "}";
            }
        },
        stage);
}

}  // namespace

std::string render_dsl(const WorkflowGraph& graph) {
    if (graph.empty()) return "(empty)";
    return render_stages(graph, graph.stages);
}

namespace {

// Splits on `sep` at nesting depth zero of {} and [].
std::vector<std::pair<std::size_t, std::string>> split_top_level(const std::string& text,
                                                                 std::size_t base,
                                                                 const std::string& sep) {
    std::vector<std::pair<std::size_t, std::string>> parts;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size();) {
        char c = text[i];
        if (c == '{' || c == '[') depth++;
        if (c == '}' || c == ']') depth--;
        if (depth == 0 && text.compare(i, sep.size(), sep) == 0) {
            parts.emplace_back(base + start, text.substr(start, i - start));
            i += sep.size();
            start = i;
        } else {
            ++i;
        }
    }
    parts.emplace_back(base + start, text.substr(start));
    return parts;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

OperatorKind parse_op(const std::string& token, std::size_t pos) {
    auto kind = operator_from_name(trimmed(token));
    if (!kind) throw DslSyntaxError(pos, "unknown operator '" + trimmed(token) + "'");
    return *kind;
}

GraphEdit parse_stage_edit(const std::string& text, std::size_t pos);

std::vector<GraphEdit> parse_stage_list(const std::string& text, std::size_t pos) {
    std::vector<GraphEdit> edits;
    for (const auto& [p, part] : split_top_level(text, pos, " -> ")) {
        if (trimmed(part).empty()) throw DslSyntaxError(p, "empty stage");
        edits.push_back(parse_stage_edit(trimmed(part), p));
    }
    return edits;
}

GraphEdit parse_stage_edit(const std::string& text, std::size_t pos) {
    if (text.rfind("loop{", 0) == 0) {
        if (text.back() != '}') throw DslSyntaxError(pos + text.size(), "expected '}'");
        std::string inner = text.substr(5, text.size() - 6);
        auto parts = split_top_level(inner, pos + 5, ", ");
        if (parts.size() < 2) throw DslSyntaxError(pos, "loop needs '{body, max_iter}'");
        std::string iter_text = trimmed(parts.back().second);
        std::string body_text;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            if (i) body_text += ", ";
            body_text += parts[i].second;
        }
        int max_iter = 0;
        try {
            std::size_t used = 0;
            max_iter = std::stoi(iter_text, &used);
            if (used != iter_text.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw DslSyntaxError(parts.back().first, "loop bound must be an integer");
        }
        AddLoopEdit edit;
        edit.max_iter = max_iter;
        for (const auto& inner_edit : parse_stage_list(body_text, parts.front().first)) {
            const auto* add = std::get_if<AddEdit>(&inner_edit);
            if (!add) throw DslSyntaxError(pos, "loop bodies hold plain operators");
            edit.body.push_back(add->op);
        }
        if (edit.body.empty()) throw DslSyntaxError(pos, "loop body is empty");
        return edit;
    }
    if (text.front() == '[') {
        if (text.back() != ']') throw DslSyntaxError(pos + text.size(), "expected ']'");
        AddParallelEdit edit;
        for (const auto& [p, part] : split_top_level(text.substr(1, text.size() - 2), pos + 1, ", ")) {
            edit.ops.push_back(parse_op(part, p));
        }
        if (edit.ops.size() < 2) throw DslSyntaxError(pos, "parallel needs at least 2 branches");
        return edit;
    }
    auto q = split_top_level(text, pos, " ? ");
    if (q.size() == 2) {
        auto c = split_top_level(q[1].second, q[1].first, " : ");
        if (c.size() != 2) throw DslSyntaxError(q[1].first, "conditional needs 'C ? T : F'");
        AddConditionalEdit edit;
        edit.condition = parse_op(q[0].second, q[0].first);
        edit.true_branch = parse_op(c[0].second, c[0].first);
        std::string f = trimmed(c[1].second);
        if (f != "done") edit.false_branch = parse_op(f, c[1].first);
        return edit;
    }
    if (q.size() > 2) throw DslSyntaxError(pos, "nested '?' is not part of the grammar");
    return AddEdit{parse_op(text, pos)};
}

}  // namespace

WorkflowGraph parse_dsl(const std::string& text) {
    std::string body = trimmed(text);
    WorkflowGraph graph;
    if (body == "(empty)" || body.empty()) return graph;
    for (const auto& edit : parse_stage_list(body, 0)) {
        graph = apply_edit(graph, edit).graph;
    }
    return graph;
}

namespace {

bool same_stage_structure(const WorkflowGraph& ga, const Stage& a, const WorkflowGraph& gb,
                          const Stage& b) {
    if (a.index() != b.index()) return false;
    auto op_at = [](const WorkflowGraph& g, const NodeId& id) -> std::optional<OperatorKind> {
        const NodeAttr* attr = g.find(id);
        if (!attr) return std::nullopt;
        return attr->op;
    };
    if (const auto* sa = std::get_if<SequentialStage>(&a)) {
        const auto& sb = std::get<SequentialStage>(b);
        return op_at(ga, sa->node) == op_at(gb, sb.node);
    }
    if (const auto* pa = std::get_if<ParallelStage>(&a)) {
        const auto& pb = std::get<ParallelStage>(b);
        if (pa->branches.size() != pb.branches.size()) return false;
        for (std::size_t i = 0; i < pa->branches.size(); ++i) {
            if (op_at(ga, pa->branches[i]) != op_at(gb, pb.branches[i])) return false;
        }
        return true;
    }
    if (const auto* ca = std::get_if<ConditionalStage>(&a)) {
        const auto& cb = std::get<ConditionalStage>(b);
        if (op_at(ga, ca->condition) != op_at(gb, cb.condition)) return false;
        if (op_at(ga, ca->true_branch) != op_at(gb, cb.true_branch)) return false;
        if (ca->false_branch.has_value() != cb.false_branch.has_value()) return false;
        if (ca->false_branch && op_at(ga, *ca->false_branch) != op_at(gb, *cb.false_branch))
            return false;
        return true;
    }
    const auto& la = std::get<LoopStage>(a);
    const auto& lb = std::get<LoopStage>(b);
    if (la.max_iter != lb.max_iter || la.body.size() != lb.body.size()) return false;
    for (std::size_t i = 0; i < la.body.size(); ++i) {
        if (!same_stage_structure(ga, la.body[i], gb, lb.body[i])) return false;
    }
    return true;
}

}  // namespace

bool same_structure(const WorkflowGraph& a, const WorkflowGraph& b) {
    if (a.stages.size() != b.stages.size()) return false;
    for (std::size_t i = 0; i < a.stages.size(); ++i) {
        if (!same_stage_structure(a, a.stages[i], b, b.stages[i])) return false;
    }
    return true;
}

}  // namespace flowcanvas
