#include <doctest.h>

#include <random>

#include "flowcanvas/action.hpp"

using namespace flowcanvas;

TEST_SUITE_BEGIN("action");

TEST_CASE("add with think") {
    auto t = parse_turn("<think>Start with Plan.</think><action>add</action>"
                        "<operator>Plan</operator>");
    REQUIRE(is_ok(t));
    const auto& env = envelope(t);
    CHECK(env.think == "Start with Plan.");
    const auto* edit = std::get_if<GraphEdit>(&env.action);
    REQUIRE(edit != nullptr);
    const auto* add = std::get_if<AddEdit>(edit);
    REQUIRE(add != nullptr);
    CHECK(add->op == OperatorKind::Plan);
}

TEST_CASE("bare finish") {
    auto t = parse_turn("<action>finish</action>");
    REQUIRE(is_ok(t));
    CHECK(std::holds_alternative<FinishAction>(envelope(t).action));
    CHECK(!envelope(t).think.has_value());
}

TEST_CASE("structure add: conditional") {
    auto t = parse_turn("<action>add</action><structure>conditional</structure>"
                        "<condition>Test</condition><true_branch>Programmer</true_branch>"
                        "<false_branch>done</false_branch>");
    REQUIRE(is_ok(t));
    const auto& edit = std::get<GraphEdit>(envelope(t).action);
    const auto* cond = std::get_if<AddConditionalEdit>(&edit);
    REQUIRE(cond != nullptr);
    CHECK(cond->condition == OperatorKind::Test);
    CHECK(cond->true_branch == OperatorKind::Programmer);
    CHECK(!cond->false_branch.has_value());
}

TEST_CASE("structure add: parallel and loop, direct action forms") {
    auto p = parse_turn("<action>parallel</action><operators>Custom, Custom, Custom</operators>");
    REQUIRE(is_ok(p));
    const auto* par = std::get_if<AddParallelEdit>(&std::get<GraphEdit>(envelope(p).action));
    REQUIRE(par != nullptr);
    CHECK(par->ops.size() == 3);

    auto l = parse_turn("<action>loop</action><body>Programmer,Test</body>"
                        "<max_iter>3</max_iter>");
    REQUIRE(is_ok(l));
    const auto* loop = std::get_if<AddLoopEdit>(&std::get<GraphEdit>(envelope(l).action));
    REQUIRE(loop != nullptr);
    CHECK(loop->body.size() == 2);
    CHECK(loop->max_iter == 3);
}

TEST_CASE("set_prompt, delete, modify") {
    auto sp = parse_turn("<action>set_prompt</action><target>node_1</target>"
                         "<prompt>Outline the approach.</prompt>");
    REQUIRE(is_ok(sp));
    const auto* set = std::get_if<SetPromptEdit>(&std::get<GraphEdit>(envelope(sp).action));
    REQUIRE(set != nullptr);
    CHECK(set->target.str() == "node_1");
    CHECK(set->prompt == "Outline the approach.");

    auto del = parse_turn("<action>delete</action><target>node_2_p1</target>");
    REQUIRE(is_ok(del));
    CHECK(std::get<DeleteEdit>(std::get<GraphEdit>(envelope(del).action)).target.str() ==
          "node_2_p1");

    auto mod = parse_turn("<action>modify</action><target>node_1</target>"
                          "<operator>Verify</operator>");
    REQUIRE(is_ok(mod));
    CHECK(std::get<ModifyEdit>(std::get<GraphEdit>(envelope(mod).action)).new_op ==
          OperatorKind::Verify);
}

TEST_CASE("typed errors") {
    auto no_action = parse_turn("<think>idea but no action</think>");
    REQUIRE(!is_ok(no_action));
    CHECK(parse_error(no_action).code == TurnParseCode::NoAction);

    auto empty = parse_turn("");
    REQUIRE(!is_ok(empty));
    CHECK(parse_error(empty).code == TurnParseCode::NoAction);

    auto multiple = parse_turn("<action>add</action><action>finish</action>");
    REQUIRE(!is_ok(multiple));
    CHECK(parse_error(multiple).code == TurnParseCode::MultipleActions);

    auto unclosed = parse_turn("<action>add</action><operator>Plan");
    REQUIRE(!is_ok(unclosed));
    CHECK(parse_error(unclosed).code == TurnParseCode::MalformedTag);

    auto unknown = parse_turn("<action>teleport</action>");
    REQUIRE(!is_ok(unknown));
    CHECK(parse_error(unknown).code == TurnParseCode::UnknownActionType);

    auto bad_op = parse_turn("<action>add</action><operator>Wizard</operator>");
    REQUIRE(!is_ok(bad_op));
    CHECK(parse_error(bad_op).code == TurnParseCode::MalformedTag);
}

TEST_CASE("trailing junk is ignored") {
    auto t = parse_turn("<action>add</action><operator>Plan</operator> and then some chatter");
    REQUIRE(is_ok(t));
}

TEST_CASE("property: total over arbitrary byte strings") {
    std::mt19937_64 rng(31337);
    std::string tags[] = {"<action>", "</action>", "<think>", "</think>", "<operator>",
                          "</operator>", "add", "finish", "Plan", "<", ">", "/"};
    for (int i = 0; i < 100000; ++i) {
        std::string s;
        int pieces = static_cast<int>(rng() % 12);
        for (int p = 0; p < pieces; ++p) {
            if (rng() % 2) {
                s += tags[rng() % 12];
            } else {
                int len = static_cast<int>(rng() % 6);
                for (int c = 0; c < len; ++c) s.push_back(static_cast<char>(rng() % 256));
            }
        }
        auto parsed = parse_turn(s);  // must not crash or throw
        if (is_ok(parsed)) CHECK(envelope(parsed).raw == s);
    }
}

TEST_SUITE_END();
