#include <doctest.h>

#include <random>
#include <set>

#include "flowcanvas/canvas.hpp"
#include "flowcanvas/dsl.hpp"

using namespace flowcanvas;

namespace {

// Backend stub answering every call with a fixed labeled response.
class EchoBackend : public Backend {
  public:
    explicit EchoBackend(std::string text = "Answer: ok") : text_(std::move(text)) {}
    BackendResponse complete(const BackendRequest&) override { return {text_, 0, 0, {}}; }
    bool serial_only() const override { return true; }

  private:
    std::string text_;
};

Canvas make_canvas(Backend& backend, int max_rounds = 20) {
    Canvas::Setup setup;
    setup.task = "2+2?";
    setup.limits.max_rounds = max_rounds;
    setup.backend = &backend;
    return Canvas(std::move(setup));
}

ActionEnvelope env_of(const std::string& text) {
    auto parsed = parse_turn(text);
    REQUIRE(is_ok(parsed));
    return envelope(parsed);
}

ActionEnvelope add_env(OperatorKind kind) {
    return env_of("<action>add</action><operator>" + std::string(operator_name(kind)) +
                  "</operator>");
}

ActionEnvelope prompt_env(const std::string& node, const std::string& prompt = "do it") {
    return env_of("<action>set_prompt</action><target>" + node + "</target><prompt>" + prompt +
                  "</prompt>");
}

const ActionEnvelope kFinish = {std::nullopt, FinishAction{}, "<action>finish</action>"};

}  // namespace

TEST_SUITE_BEGIN("canvas");

TEST_CASE("render_feedback segment grammar") {
    FeedbackMessage status_only;
    status_only.status = "Pending - Awaiting Prompt";
    status_only.current_dsl = "(empty)";
    CHECK(render_feedback(status_only) ==
          "[Status]: Pending - Awaiting Prompt | [Current DSL]: (empty)");

    FeedbackMessage with_output;
    with_output.current_dsl = "Plan -> Programmer";
    with_output.output = "610";
    CHECK(render_feedback(with_output) == "[Output]: 610 | [Current DSL]: Plan -> Programmer");

    FeedbackMessage with_hint;
    with_hint.current_dsl = "Decompose";
    with_hint.output = "3 sub-problems";
    with_hint.next_hint = "ADD:Custom";
    CHECK(render_feedback(with_hint) ==
          "[Output]: 3 sub-problems | [Current DSL]: Decompose | [NEXT]: ADD:Custom");

    FeedbackMessage full;
    full.status = "Finished";
    full.current_dsl = "Plan";
    full.block_finish = 0;
    CHECK(render_feedback(full) == "[Status]: Finished | [Current DSL]: Plan | [BLOCK_FINISH]=0");
}

TEST_CASE("initial observation carries the protocol essentials") {
    std::vector<std::string> warnings;
    auto obs = initial_observation("2+2?", describe_library(), default_action_template(),
                                   &warnings);
    CHECK(obs.find("output EXACTLY ONE XML action") != std::string::npos);
    CHECK(obs.find("Task: 2+2?") != std::string::npos);
    CHECK(obs.find("Available Operators (12 total)") != std::string::npos);
    CHECK(warnings.empty());

    auto bare = initial_observation("2+2?", "", default_action_template(), &warnings);
    CHECK(bare.find("Available Operators") == std::string::npos);
    REQUIRE(warnings.size() == 1);

    auto overridden = initial_observation("2+2?", describe_library(), "CUSTOM TEMPLATE");
    CHECK(overridden.find("CUSTOM TEMPLATE") != std::string::npos);
}

TEST_CASE("first add produces the awaiting-prompt feedback verbatim") {
    EchoBackend backend;
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();

    auto [state, fb] = canvas.step(canvas.initial_state(), add_env(OperatorKind::Plan), profile);
    CHECK(fb.raw == "[Status]: Pending - Awaiting Prompt | [Current DSL]: (empty)");
    CHECK(state.phase == Phase::AWAITING_PROMPT);
    REQUIRE(state.pending.size() == 1);
    CHECK(state.pending[0].str() == "node_1");
    CHECK(state.turn_index == 1);
    REQUIRE(state.history.size() == 1);
    CHECK(state.history[0].feedback_raw == fb.raw);
}

TEST_CASE("set_prompt completes the stage, executes it, and returns to BUILDING") {
    EchoBackend backend("Approach: add the numbers\nPlan:\n1. add");
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();

    auto r1 = canvas.step(canvas.initial_state(), add_env(OperatorKind::Plan), profile);
    auto r2 = canvas.step(r1.state, prompt_env("node_1"), profile);
    CHECK(r2.state.phase == Phase::BUILDING);
    CHECK(r2.state.pending.empty());
    CHECK(r2.feedback.current_dsl == "Plan");
    REQUIRE(r2.feedback.output.has_value());
    CHECK(*r2.feedback.output == "add the numbers");
    CHECK(*r2.state.graph.find(NodeId{1, std::nullopt})->prompt == "do it");
}

TEST_CASE("parallel add queues prompts FIFO and executes on the last one") {
    EchoBackend backend("Answer: Pontins");
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();

    auto s0 = canvas.initial_state();
    auto r1 = canvas.step(s0, env_of("<action>add</action><structure>parallel</structure>"
                                     "<operators>Custom,Custom,Custom</operators>"),
                          profile);
    CHECK(r1.feedback.raw ==
          "[Status]: Pending - Awaiting Prompts for 3 parallel branches | [Current DSL]: (empty)");
    REQUIRE(r1.state.pending.size() == 3);
    CHECK(r1.state.pending[0].str() == "node_1_p0");

    auto r2 = canvas.step(r1.state, prompt_env("node_1_p0"), profile);
    CHECK(r2.state.phase == Phase::AWAITING_PROMPT);
    CHECK(r2.feedback.raw == "[Status]: Pending - Awaiting Prompt | [Current DSL]: (empty)");

    // Prompts must land in FIFO order.
    auto wrong = canvas.step(r2.state, prompt_env("node_1_p2"), profile);
    CHECK(wrong.state.phase == Phase::AWAITING_PROMPT);
    CHECK(wrong.feedback.status ==
          "Action rejected: expected prompt for node_1_p1, got node_1_p2");

    auto r3 = canvas.step(r2.state, prompt_env("node_1_p1"), profile);
    auto r4 = canvas.step(r3.state, prompt_env("node_1_p2"), profile);
    CHECK(r4.state.phase == Phase::BUILDING);
    CHECK(r4.feedback.current_dsl == "[Custom, Custom, Custom]");
    CHECK(*r4.feedback.output == "Pontins; Pontins; Pontins");
}

TEST_CASE("finish gating") {
    EchoBackend backend("is_correct: True\nAnswer: 4");
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();

    auto state = canvas.initial_state();
    auto advance = [&](const ActionEnvelope& e) {
        auto r = canvas.step(state, e, profile);
        state = r.state;
        return r.feedback;
    };

    // Too small: finish is blocked and consumes a round.
    advance(add_env(OperatorKind::Custom));
    advance(prompt_env("node_1"));
    auto blocked = advance(kFinish);
    CHECK(state.phase == Phase::BUILDING);
    CHECK(blocked.block_finish == 1);
    CHECK(blocked.status.find("Finish blocked: missing") == 0);
    CHECK(blocked.status.find("min_operators(1/3)") != std::string::npos);
    CHECK(state.turn_index == 3);

    advance(add_env(OperatorKind::Verify));
    advance(prompt_env("node_2"));
    advance(add_env(OperatorKind::Format));
    auto pre_finish = advance(prompt_env("node_3"));
    CHECK(pre_finish.block_finish == 0);  // gate satisfied, advertised
    CHECK(pre_finish.next_hint == "FINISH");

    auto done = advance(kFinish);
    CHECK(state.phase == Phase::FINISHED);
    CHECK(done.block_finish == 0);
    CHECK(done.status == "Finished");
    CHECK(done.current_dsl == "Custom -> Verify -> Format");
}

TEST_CASE("wrong-phase actions become repair feedback, never exceptions") {
    EchoBackend backend;
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();

    auto s0 = canvas.initial_state();
    // set_prompt while BUILDING.
    auto r = canvas.step(s0, prompt_env("node_1"), profile);
    CHECK(r.state.phase == Phase::BUILDING);
    CHECK(r.feedback.status == "Action rejected: no node awaiting a prompt");
    CHECK(r.state.turn_index == 1);

    // add while AWAITING_PROMPT.
    auto r1 = canvas.step(r.state, add_env(OperatorKind::Plan), profile);
    auto r2 = canvas.step(r1.state, add_env(OperatorKind::Verify), profile);
    CHECK(r2.state.phase == Phase::AWAITING_PROMPT);
    CHECK(r2.feedback.status == "Action rejected: awaiting prompt for node_1");
    CHECK(r2.feedback.next_hint == "SET_PROMPT:node_1");

    // Graph-edit precondition failures surface the same way.
    auto r3 = canvas.step(r.state, env_of("<action>delete</action><target>node_9</target>"),
                          profile);
    CHECK(r3.feedback.status.find("Edit rejected:") == 0);
}

TEST_CASE("invalid turns consume a round and echo the reason") {
    EchoBackend backend;
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();
    auto r = canvas.step_invalid(canvas.initial_state(), "gibberish", "no <action> tag", profile);
    CHECK(r.state.turn_index == 1);
    CHECK(r.feedback.status == "Invalid turn: no <action> tag");
    REQUIRE(r.state.history.size() == 1);
    CHECK(r.state.history[0].action_raw == "gibberish");
}

TEST_CASE("round budget exhaustion truncates the episode") {
    EchoBackend backend;
    auto canvas = make_canvas(backend, 3);
    auto profile = RewardProfile::appendix_c();

    auto state = canvas.initial_state();
    for (int i = 0; i < 3; ++i) {
        state = canvas.step_invalid(state, "noop", "no <action> tag", profile).state;
    }
    CHECK(state.turn_index == 3);
    CHECK(state.phase == Phase::BUILDING);

    auto r = canvas.step(state, add_env(OperatorKind::Plan), profile);
    CHECK(r.state.phase == Phase::FINISHED);
    CHECK(r.state.truncated);
    CHECK(r.feedback.status == "Round budget exceeded");
    CHECK(r.state.history.size() == 3);  // the over-budget turn is not recorded
}

TEST_CASE("FINISHED is absorbing") {
    EchoBackend backend("is_correct: True");
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();
    auto state = canvas.initial_state();
    for (const auto& e : {add_env(OperatorKind::Custom), prompt_env("node_1"),
                          add_env(OperatorKind::Verify), prompt_env("node_2"),
                          add_env(OperatorKind::Format), prompt_env("node_3"), kFinish}) {
        state = canvas.step(state, e, profile).state;
    }
    REQUIRE(state.phase == Phase::FINISHED);
    int turns = state.turn_index;
    auto after = canvas.step(state, add_env(OperatorKind::Plan), profile);
    CHECK(after.state.phase == Phase::FINISHED);
    CHECK(after.state.turn_index == turns);
    CHECK(after.state.history.size() == state.history.size());
    CHECK(after.feedback.status == "Episode already finished");
}

TEST_CASE("state-machine conformance over every (phase, action-variant) pair") {
    auto profile = RewardProfile::appendix_c();
    std::vector<std::pair<std::string, ActionEnvelope>> actions = {
        {"add", add_env(OperatorKind::Plan)},
        {"parallel", env_of("<action>parallel</action><operators>Custom,Custom</operators>")},
        {"conditional", env_of("<action>conditional</action><condition>Test</condition>"
                               "<true_branch>Programmer</true_branch>"
                               "<false_branch>done</false_branch>")},
        {"loop", env_of("<action>loop</action><body>Custom</body><max_iter>2</max_iter>")},
        {"delete", env_of("<action>delete</action><target>node_1</target>")},
        {"modify", env_of("<action>modify</action><target>node_1</target>"
                          "<operator>Verify</operator>")},
        {"set_prompt", prompt_env("node_1")},
        {"finish", kFinish},
    };

    for (const auto& [name, action] : actions) {
        EchoBackend backend("is_correct: True");
        auto canvas = make_canvas(backend);

        // BUILDING with one committed node.
        auto building = canvas.step(canvas.initial_state(), add_env(OperatorKind::Custom),
                                    profile);
        auto committed = canvas.step(building.state, prompt_env("node_1"), profile).state;
        REQUIRE(committed.phase == Phase::BUILDING);
        auto from_building = canvas.step(committed, action, profile);
        if (name == "add" || name == "parallel" || name == "conditional" || name == "loop") {
            CHECK(from_building.state.phase == Phase::AWAITING_PROMPT);
            CHECK(!from_building.state.pending.empty());
        } else if (name == "delete" || name == "modify") {
            CHECK(from_building.state.phase == Phase::BUILDING);
        } else if (name == "set_prompt") {
            CHECK(from_building.state.phase == Phase::BUILDING);
            CHECK(from_building.feedback.status.find("Action rejected") == 0);
        } else {  // finish on a 1-node graph: blocked
            CHECK(from_building.state.phase == Phase::BUILDING);
            CHECK(from_building.feedback.block_finish == 1);
        }
        // Every consumed turn appends exactly one history entry.
        CHECK(from_building.state.history.size() == committed.history.size() + 1);
        CHECK(from_building.state.turn_index == committed.turn_index + 1);

        // AWAITING_PROMPT: only set_prompt for the queue head is accepted.
        auto awaiting = canvas.step(committed, add_env(OperatorKind::Verify), profile).state;
        REQUIRE(awaiting.phase == Phase::AWAITING_PROMPT);
        auto from_awaiting = canvas.step(awaiting, action, profile);
        if (name == "set_prompt") {
            // Target node_1 is not the queue head (node_2) -> rejected.
            CHECK(from_awaiting.state.phase == Phase::AWAITING_PROMPT);
            CHECK(from_awaiting.feedback.status.find("Action rejected") == 0);
        } else {
            CHECK(from_awaiting.state.phase == Phase::AWAITING_PROMPT);
            bool rejected = from_awaiting.feedback.status.find("blocked") != std::string::npos ||
                            from_awaiting.feedback.status.find("Action rejected") == 0;
            CHECK(rejected);
        }
        CHECK(from_awaiting.state.graph == awaiting.graph);
    }
}

TEST_CASE("history grows by exactly one accepted turn with the right tail") {
    EchoBackend backend("Answer: 4");
    auto canvas = make_canvas(backend);
    auto profile = RewardProfile::appendix_c();
    auto state = canvas.initial_state();
    auto add = env_of("<think>start</think><action>add</action><operator>Custom</operator>");
    auto r = canvas.step(state, add, profile);
    REQUIRE(r.state.history.size() == 1);
    CHECK(r.state.history.back().think == "start");
    CHECK(r.state.history.back().action_raw == add.raw);
    CHECK(r.state.history.back().feedback_raw == r.feedback.raw);
}

TEST_CASE("property: finish iff the profile gate passes, fuzzed") {
    std::mt19937_64 rng(321);
    auto kinds = all_operator_kinds();
    for (int i = 0; i < 1000; ++i) {
        EchoBackend backend("Answer: x");
        auto canvas = make_canvas(backend, 1000);
        RewardProfile profile =
            rng() % 2 ? RewardProfile::table7() : RewardProfile::appendix_c();
        profile.min_operators = 1 + static_cast<int>(rng() % 6);
        profile.require_checker = rng() % 2;
        profile.require_control = rng() % 2;
        profile.require_format_last = rng() % 2;

        auto state = canvas.initial_state();
        int stages = static_cast<int>(rng() % 5);
        for (int s = 0; s < stages; ++s) {
            Canvas::StepResult r{state, {}};
            if (rng() % 4 == 0) {
                r = canvas.step(state,
                                env_of("<action>parallel</action>"
                                       "<operators>Custom,Custom</operators>"),
                                profile);
            } else {
                r = canvas.step(state, add_env(kinds[rng() % kinds.size()]), profile);
            }
            state = r.state;
            while (state.phase == Phase::AWAITING_PROMPT) {
                state = canvas.step(state, prompt_env(state.pending.front().str()), profile)
                            .state;
            }
        }
        auto report = structural_checks(state.graph, profile.min_operators);
        bool expected = finish_allowed(report, profile);
        auto r = canvas.step(state, kFinish, profile);
        CHECK((r.state.phase == Phase::FINISHED) == expected);
    }
}

TEST_CASE("determinism: identical inputs yield identical outputs") {
    auto run_once = [] {
        EchoBackend backend("Answer: 4");
        auto canvas = make_canvas(backend);
        auto profile = RewardProfile::appendix_c();
        auto state = canvas.initial_state();
        std::vector<std::string> feedback;
        for (const auto& e : {add_env(OperatorKind::Custom), prompt_env("node_1"),
                              add_env(OperatorKind::Verify), prompt_env("node_2"), kFinish}) {
            auto r = canvas.step(state, e, profile);
            state = r.state;
            feedback.push_back(r.feedback.raw);
        }
        return feedback;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("seeded hint randomization varies the checker suggestion deterministically") {
    EchoBackend backend("Answer: x");
    auto profile = RewardProfile::appendix_c();

    auto hints_for_seed = [&](std::uint64_t seed) {
        Canvas::Setup setup;
        setup.task = "t";
        setup.backend = &backend;
        setup.limits.hint_seed = seed;
        Canvas canvas(std::move(setup));
        std::vector<std::string> hints;
        auto state = canvas.initial_state();
        for (int i = 0; i < 6; ++i) {
            state = canvas.step(state, add_env(OperatorKind::Custom), profile).state;
            auto r = canvas.step(state, prompt_env(state.pending.front().str()), profile);
            state = r.state;
            REQUIRE(r.feedback.next_hint.has_value());
            hints.push_back(*r.feedback.next_hint);
        }
        return hints;
    };

    auto a = hints_for_seed(11);
    auto b = hints_for_seed(11);
    CHECK(a == b);  // deterministic per seed
    std::set<std::string> seen(a.begin(), a.end());
    for (const auto& h : seen) {
        bool known = h == "ADD:Verify" || h == "ADD:Review" || h == "ADD:Test";
        CHECK(known);
    }
    CHECK(seen.size() > 1);  // the seed actually varies the suggestion
}

TEST_CASE("history rendering truncates oldest turns, never the system prompt") {
    EchoBackend backend("Answer: 4");
    Canvas::Setup setup;
    setup.task = "2+2?";
    setup.limits.max_rounds = 50;
    setup.limits.max_context_tokens = 400;  // ~1600 chars, tiny on purpose
    setup.backend = &backend;
    Canvas canvas(std::move(setup));
    auto profile = RewardProfile::appendix_c();

    auto state = canvas.initial_state();
    for (int i = 0; i < 12; ++i) {
        state = canvas
                    .step_invalid(state,
                                  "<padding turn " + std::to_string(i) + "> " +
                                      std::string(120, 'x'),
                                  "no <action> tag", profile)
                    .state;
    }
    auto rendered = canvas.render_history(state);
    CHECK(rendered.find("Task: 2+2?") != std::string::npos);
    CHECK(rendered.find("[earlier turns truncated]") != std::string::npos);
    CHECK(rendered.find("<padding turn 0>") == std::string::npos);
    CHECK(rendered.find("<padding turn 11>") != std::string::npos);
}

TEST_SUITE_END();
