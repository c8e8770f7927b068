#include <doctest.h>

#include <random>

#include "flowcanvas/dsl.hpp"
#include "flowcanvas/graph.hpp"

using namespace flowcanvas;

namespace {

WorkflowGraph from_edits(const std::vector<GraphEdit>& edits) {
    WorkflowGraph g;
    for (const auto& e : edits) g = apply_edit(g, e).graph;
    return g;
}

// Random graph generator used by the round-trip and fuzz properties. Builds
// canonically through apply_edit so node ids follow creation order.
WorkflowGraph random_graph(std::mt19937_64& rng, int max_stages = 6) {
    auto kinds = all_operator_kinds();
    auto pick_op = [&] { return kinds[rng() % kinds.size()]; };
    WorkflowGraph g;
    int stages = static_cast<int>(rng() % (max_stages + 1));
    for (int i = 0; i < stages; ++i) {
        switch (rng() % 4) {
            case 0:
                g = apply_edit(g, AddEdit{pick_op()}).graph;
                break;
            case 1: {
                AddParallelEdit e;
                int branches = 2 + static_cast<int>(rng() % 3);
                for (int j = 0; j < branches; ++j) e.ops.push_back(pick_op());
                g = apply_edit(g, e).graph;
                break;
            }
            case 2: {
                AddConditionalEdit e;
                e.condition = pick_op();
                e.true_branch = pick_op();
                if (rng() % 2) e.false_branch = pick_op();
                g = apply_edit(g, e).graph;
                break;
            }
            default: {
                AddLoopEdit e;
                e.max_iter = 1 + static_cast<int>(rng() % 5);
                int body = 1 + static_cast<int>(rng() % 3);
                for (int j = 0; j < body; ++j) e.body.push_back(pick_op());
                g = apply_edit(g, e).graph;
                break;
            }
        }
    }
    return g;
}

std::vector<NodeId> all_ids(const WorkflowGraph& g) {
    std::vector<NodeId> ids;
    for (const auto& [id, attr] : g.nodes) {
        (void)attr;
        ids.push_back(id);
    }
    return ids;
}

}  // namespace

TEST_SUITE_BEGIN("graph");

TEST_CASE("operator enumeration has exactly 12 members with category tags") {
    auto kinds = all_operator_kinds();
    CHECK(kinds.size() == 12);
    CHECK(operator_category(OperatorKind::Plan) == OperatorCategory::Planning);
    CHECK(operator_category(OperatorKind::Decompose) == OperatorCategory::Planning);
    CHECK(operator_category(OperatorKind::Programmer) == OperatorCategory::Solving);
    CHECK(operator_category(OperatorKind::Custom) == OperatorCategory::Solving);
    CHECK(operator_category(OperatorKind::AnswerGenerate) == OperatorCategory::Solving);
    CHECK(operator_category(OperatorKind::Test) == OperatorCategory::Verification);
    CHECK(operator_category(OperatorKind::Review) == OperatorCategory::Verification);
    CHECK(operator_category(OperatorKind::Verify) == OperatorCategory::Verification);
    CHECK(operator_category(OperatorKind::Revise) == OperatorCategory::Revision);
    CHECK(operator_category(OperatorKind::ScEnsemble) == OperatorCategory::Ensemble);
    CHECK(operator_category(OperatorKind::Aggregate) == OperatorCategory::Ensemble);
    CHECK(operator_category(OperatorKind::Format) == OperatorCategory::Formatting);
    for (auto k : kinds) CHECK(operator_from_name(operator_name(k)) == k);
    CHECK(!operator_from_name("AnswerGen").has_value());
}

TEST_CASE("node id rendering and parsing") {
    CHECK(NodeId{1, std::nullopt}.str() == "node_1");
    CHECK(NodeId{2, 0}.str() == "node_2_p0");
    CHECK(NodeId::parse("node_7") == NodeId{7, std::nullopt});
    CHECK(NodeId::parse("node_2_p1") == NodeId{2, 1});
    CHECK(!NodeId::parse("node_").has_value());
    CHECK(!NodeId::parse("n0de_1").has_value());
    CHECK(!NodeId::parse("node_1_p").has_value());
}

TEST_CASE("add on empty graph creates node_1") {
    WorkflowGraph g;
    auto res = apply_edit(g, AddEdit{OperatorKind::Plan});
    REQUIRE(res.created.size() == 1);
    CHECK(res.created[0].str() == "node_1");
    CHECK(res.graph.node_count() == 1);
    CHECK(res.graph.find(res.created[0])->op == OperatorKind::Plan);
    CHECK(g.empty());  // input untouched
}

TEST_CASE("parallel add after one stage creates node_2_p0..p2") {
    auto g = from_edits({AddEdit{OperatorKind::Decompose}});
    auto res = apply_edit(g, AddParallelEdit{{OperatorKind::Custom, OperatorKind::Custom,
                                              OperatorKind::Custom}});
    REQUIRE(res.created.size() == 3);
    CHECK(res.created[0].str() == "node_2_p0");
    CHECK(res.created[1].str() == "node_2_p1");
    CHECK(res.created[2].str() == "node_2_p2");
}

TEST_CASE("delete on a single-node graph yields the empty graph") {
    auto g = from_edits({AddEdit{OperatorKind::Plan}});
    auto res = apply_edit(g, DeleteEdit{NodeId{1, std::nullopt}});
    CHECK(res.graph.empty());
    CHECK(res.graph.node_count() == 0);
}

TEST_CASE("delete then add never reuses a stage index") {
    auto g = from_edits({AddEdit{OperatorKind::Plan}, AddEdit{OperatorKind::Custom}});
    g = apply_edit(g, DeleteEdit{NodeId{2, std::nullopt}}).graph;
    auto res = apply_edit(g, AddEdit{OperatorKind::Verify});
    CHECK(res.created[0].str() == "node_3");
}

TEST_CASE("delete of a parallel branch collapses a one-branch stage to sequential") {
    auto g = from_edits({AddParallelEdit{{OperatorKind::Custom, OperatorKind::Custom}}});
    g = apply_edit(g, DeleteEdit{NodeId{1, 0}}).graph;
    REQUIRE(g.stages.size() == 1);
    CHECK(std::holds_alternative<SequentialStage>(g.stages[0]));
    CHECK(render_dsl(g) == "Custom");
    CHECK(validate_graph(g).empty());
}

TEST_CASE("edit errors") {
    WorkflowGraph g;
    CHECK_THROWS_AS(apply_edit(g, DeleteEdit{NodeId{3, std::nullopt}}), GraphError);
    CHECK_THROWS_AS(apply_edit(g, AddParallelEdit{{OperatorKind::Custom}}), GraphError);
    CHECK_THROWS_AS(apply_edit(g, AddLoopEdit{{}, 2}), GraphError);
    CHECK_THROWS_AS(apply_edit(g, AddLoopEdit{{OperatorKind::Custom}, 0}), GraphError);
    try {
        apply_edit(g, DeleteEdit{NodeId{3, std::nullopt}});
    } catch (const GraphError& e) {
        CHECK(e.code() == GraphErrorCode::UnknownNode);
    }
}

TEST_CASE("validate_graph flags constructed corruption") {
    auto g = from_edits({AddEdit{OperatorKind::Plan}});
    CHECK(validate_graph(g).empty());

    SUBCASE("dangling reference") {
        g.stages.push_back(SequentialStage{NodeId{3, std::nullopt}});
        auto v = validate_graph(g);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == "DanglingReference");
        CHECK(v[0].str() == "DanglingReference(node_3)");
    }
    SUBCASE("duplicate id") {
        g.stages.push_back(SequentialStage{NodeId{1, std::nullopt}});
        auto v = validate_graph(g);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == "DuplicateId");
    }
    SUBCASE("orphan node") {
        g.nodes[NodeId{9, std::nullopt}] = NodeAttr{OperatorKind::Custom, {}, {}};
        auto v = validate_graph(g);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == "OrphanNode");
    }
}

TEST_CASE("structural checks on the sequential case-study graph") {
    auto g = from_edits({AddEdit{OperatorKind::Plan}, AddEdit{OperatorKind::Programmer},
                         AddEdit{OperatorKind::Verify}, AddEdit{OperatorKind::Format}});
    // Oracle: enumerate the four predicates by hand over the node list.
    auto r = structural_checks(g, 3);
    CHECK(r.has_checker);
    CHECK(r.has_format);
    CHECK(r.has_min_operators);
    CHECK(!r.has_control);
    CHECK(r.node_count == 4);
}

TEST_CASE("structural checks on the empty graph are all false") {
    auto r = structural_checks(WorkflowGraph{}, 3);
    CHECK(!r.has_checker);
    CHECK(!r.has_format);
    CHECK(!r.has_min_operators);
    CHECK(!r.has_control);
    CHECK(r.node_count == 0);
}

TEST_CASE("structural checks count parallel members and detect control") {
    auto g = from_edits({AddEdit{OperatorKind::Decompose},
                         AddParallelEdit{{OperatorKind::Custom, OperatorKind::Custom,
                                          OperatorKind::Custom}},
                         AddEdit{OperatorKind::Verify}, AddEdit{OperatorKind::Aggregate},
                         AddEdit{OperatorKind::Format}});
    auto r = structural_checks(g, 5);
    CHECK(r.node_count == 7);
    CHECK(r.has_checker);
    CHECK(r.has_format);
    CHECK(r.has_min_operators);
    CHECK(r.has_control);
}

TEST_CASE("format must occupy the final stage") {
    auto g = from_edits({AddEdit{OperatorKind::Format}, AddEdit{OperatorKind::Custom}});
    CHECK(!structural_checks(g, 1).has_format);
}

TEST_CASE("property: random edit sequences keep the graph valid") {
    std::mt19937_64 rng(20240811);
    auto kinds = all_operator_kinds();
    for (int round = 0; round < 60; ++round) {
        WorkflowGraph g;
        for (int step = 0; step < 50; ++step) {
            auto ids = all_ids(g);
            int choice = static_cast<int>(rng() % 7);
            try {
                switch (choice) {
                    case 0:
                        g = apply_edit(g, AddEdit{kinds[rng() % kinds.size()]}).graph;
                        break;
                    case 1: {
                        AddParallelEdit e;
                        for (int j = 0; j < 2 + static_cast<int>(rng() % 2); ++j)
                            e.ops.push_back(kinds[rng() % kinds.size()]);
                        g = apply_edit(g, e).graph;
                        break;
                    }
                    case 2: {
                        AddConditionalEdit e{kinds[rng() % kinds.size()],
                                             kinds[rng() % kinds.size()], std::nullopt};
                        g = apply_edit(g, e).graph;
                        break;
                    }
                    case 3: {
                        AddLoopEdit e{{kinds[rng() % kinds.size()]},
                                      1 + static_cast<int>(rng() % 4)};
                        g = apply_edit(g, e).graph;
                        break;
                    }
                    case 4:
                        if (!ids.empty())
                            g = apply_edit(g, DeleteEdit{ids[rng() % ids.size()]}).graph;
                        break;
                    case 5:
                        if (!ids.empty())
                            g = apply_edit(g, ModifyEdit{ids[rng() % ids.size()],
                                                         kinds[rng() % kinds.size()]})
                                    .graph;
                        break;
                    default:
                        if (!ids.empty())
                            g = apply_edit(g, SetPromptEdit{ids[rng() % ids.size()], "p"}).graph;
                        break;
                }
            } catch (const GraphError&) {
                // Precondition misses are fine; the invariant is about results.
            }
            auto violations = validate_graph(g);
            if (!violations.empty()) {
                CAPTURE(violations[0].str());
                REQUIRE(violations.empty());
            }
        }
    }
}

TEST_CASE("property: delete of a fresh node is the identity") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        auto g = random_graph(rng, 4);
        auto res = apply_edit(g, AddEdit{OperatorKind::Custom});
        auto back = apply_edit(res.graph, DeleteEdit{res.created[0]}).graph;
        back.next_stage_index = g.next_stage_index;  // index retirement is intended
        CHECK(back == g);
    }
}

TEST_CASE("property: canonical edit sequence reproduces random targets exactly") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        auto target = random_graph(rng);
        // Give a few nodes prompts so the set_prompt tail is exercised.
        for (const auto& id : all_ids(target)) {
            if (rng() % 2) target = apply_edit(target, SetPromptEdit{id, "p:" + id.str()}).graph;
        }
        WorkflowGraph rebuilt;
        for (const auto& e : canonical_edit_sequence(target)) {
            rebuilt = apply_edit(rebuilt, e).graph;
        }
        CHECK(rebuilt == target);
    }
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("dsl");

TEST_CASE("sequential graph renders with arrow separators") {
    auto g = from_edits({AddEdit{OperatorKind::Plan}, AddEdit{OperatorKind::Programmer},
                         AddEdit{OperatorKind::Verify}, AddEdit{OperatorKind::Format}});
    CHECK(render_dsl(g) == "Plan -> Programmer -> Verify -> Format");
}

TEST_CASE("parallel graph renders branch lists") {
    auto g = from_edits({AddEdit{OperatorKind::Decompose},
                         AddParallelEdit{{OperatorKind::Custom, OperatorKind::Custom,
                                          OperatorKind::Custom}},
                         AddEdit{OperatorKind::Verify}, AddEdit{OperatorKind::Aggregate}});
    CHECK(render_dsl(g) == "Decompose -> [Custom, Custom, Custom] -> Verify -> Aggregate");
}

TEST_CASE("empty graph renders (empty)") {
    CHECK(render_dsl(WorkflowGraph{}) == "(empty)");
}

TEST_CASE("conditional and loop rendering") {
    auto g = from_edits({AddConditionalEdit{OperatorKind::Test, OperatorKind::Programmer,
                                            std::nullopt}});
    CHECK(render_dsl(g) == "Test ? Programmer : done");

    g = from_edits({AddConditionalEdit{OperatorKind::Test, OperatorKind::Programmer,
                                       OperatorKind::Revise}});
    CHECK(render_dsl(g) == "Test ? Programmer : Revise");

    g = from_edits({AddLoopEdit{{OperatorKind::Programmer, OperatorKind::Test}, 3}});
    CHECK(render_dsl(g) == "loop{Programmer -> Test, 3}");
}

TEST_CASE("parse_dsl inverts render_dsl on the case-study strings") {
    auto g = parse_dsl("Plan -> Programmer -> Verify -> Format");
    REQUIRE(g.stages.size() == 4);
    CHECK(render_dsl(g) == "Plan -> Programmer -> Verify -> Format");

    CHECK(parse_dsl("(empty)").empty());

    auto c = parse_dsl("Test ? Programmer : done");
    REQUIRE(c.stages.size() == 1);
    auto* cond = std::get_if<ConditionalStage>(&c.stages[0]);
    REQUIRE(cond != nullptr);
    CHECK(c.find(cond->condition)->op == OperatorKind::Test);
    CHECK(c.find(cond->true_branch)->op == OperatorKind::Programmer);
    CHECK(!cond->false_branch.has_value());
}

TEST_CASE("parse_dsl reports positions for syntax errors") {
    CHECK_THROWS_AS(parse_dsl("Plan -> Bogus"), DslSyntaxError);
    CHECK_THROWS_AS(parse_dsl("[Custom]"), DslSyntaxError);
    CHECK_THROWS_AS(parse_dsl("loop{Custom, x}"), DslSyntaxError);
    CHECK_THROWS_AS(parse_dsl("Plan -> "), DslSyntaxError);
    try {
        parse_dsl("Plan -> Bogus");
    } catch (const DslSyntaxError& e) {
        CHECK(e.position() == 8);
    }
}

TEST_CASE("property: 1000-graph DSL round trip") {
    std::mt19937_64 rng(123456);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        auto g = random_graph(rng);
        auto text = render_dsl(g);
        auto parsed = parse_dsl(text);
        if (render_dsl(parsed) != text) mismatches++;
        if (!same_structure(parsed, g)) mismatches++;
        // Canonically built graphs round trip with identical ids too.
        if (!(parsed.nodes.size() == g.nodes.size())) mismatches++;
    }
    CHECK(mismatches == 0);
}

TEST_SUITE_END();
