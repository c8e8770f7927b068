#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "flowcanvas/config.hpp"
#include "flowcanvas/dsl.hpp"
#include "flowcanvas/metrics.hpp"
#include "flowcanvas/runner.hpp"
#include "flowcanvas/toy_lab.hpp"

namespace py = pybind11;
using namespace flowcanvas;

namespace {

py::dict feedback_to_dict(const FeedbackMessage& fb) {
    py::dict d;
    d["status"] = fb.status;
    d["current_dsl"] = fb.current_dsl;
    d["output"] = fb.output ? py::object(py::str(*fb.output)) : py::none();
    d["next_hint"] = fb.next_hint ? py::object(py::str(*fb.next_hint)) : py::none();
    d["block_finish"] = fb.block_finish ? py::object(py::int_(*fb.block_finish)) : py::none();
    d["raw"] = fb.raw;
    return d;
}

py::dict reward_to_dict(const RewardBreakdown& r) {
    py::dict d;
    d["r_checker"] = r.r_checker;
    d["r_format"] = r.r_format;
    d["r_operator"] = r.r_operator;
    d["r_control"] = r.r_control;
    d["r_diversity"] = r.r_diversity;
    d["gate_open"] = r.gate_open;
    d["r_answer"] = r.r_answer;
    d["total"] = r.total;
    return d;
}

// Interactive canvas session driven by raw turn text; owns its backend.
class CanvasSession {
  public:
    CanvasSession(std::string task, const std::string& mock_path, std::string profile_name,
                  int max_rounds, const std::string& tests_path)
        : profile_(RewardProfile::by_name(profile_name).value_or(RewardProfile::table7())) {
        backend_ = MockBackend::from_file(mock_path);
        Canvas::Setup setup;
        setup.task = std::move(task);
        setup.limits.max_rounds = max_rounds;
        setup.backend = backend_.get();
        if (!tests_path.empty()) {
            std::ifstream in(tests_path, std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            setup.tests_text = ss.str();
        }
        canvas_ = std::make_unique<Canvas>(std::move(setup));
        state_ = canvas_->initial_state();
    }

    py::dict step(const std::string& raw_turn) {
        auto parsed = parse_turn(raw_turn);
        Canvas::StepResult result =
            is_ok(parsed) ? canvas_->step(state_, envelope(parsed), profile_)
                          : canvas_->step_invalid(state_, raw_turn,
                                                  parse_error(parsed).message, profile_);
        state_ = std::move(result.state);
        return feedback_to_dict(result.feedback);
    }

    std::string phase() const { return phase_name(state_.phase); }
    std::string dsl() const { return render_dsl(state_.graph); }
    int turn_index() const { return state_.turn_index; }
    bool truncated() const { return state_.truncated; }
    std::string observation() const { return canvas_->render_history(state_); }

  private:
    RewardProfile profile_;
    std::unique_ptr<MockBackend> backend_;
    std::unique_ptr<Canvas> canvas_;
    CanvasState state_;
};

py::dict run_scripted_episode(const std::string& dataset_path, const std::string& task_id,
                              const std::string& director_path, const std::string& mock_path,
                              const std::string& profile_name) {
    DatasetRecord record;
    bool found = false;
    for (const auto& rec : load_dataset(dataset_path)) {
        if (rec.task_id == task_id) {
            record = rec;
            found = true;
        }
    }
    if (!found) throw std::runtime_error("no record with task_id " + task_id);
    auto profile = RewardProfile::by_name(profile_name);
    if (!profile) throw std::runtime_error("unknown profile " + profile_name);

    ScriptedDirector policy(ScriptedDirector::load(director_path, task_id));
    auto backend = MockBackend::from_file(mock_path, task_id);
    RunConfig config;
    auto traj = run_episode(record, policy, config, *profile, *backend, mock_path);

    py::dict d;
    d["task_id"] = traj.task_id;
    d["final_dsl"] = traj.final_dsl;
    d["answer"] = traj.answer;
    d["turns"] = traj.turns.size();
    d["truncated"] = traj.truncated;
    d["reward"] = reward_to_dict(traj.reward);
    py::list turn_list;
    for (const auto& t : traj.turns) {
        py::dict turn;
        turn["action"] = t.action_raw;
        turn["feedback"] = t.feedback_raw;
        turn_list.append(turn);
    }
    d["turn_log"] = turn_list;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "workflow canvas: graph DSL, canvas environment, rewards and policy tools";

    // Graph + DSL.
    m.def("parse_dsl_roundtrip",
          [](const std::string& text) { return render_dsl(parse_dsl(text)); },
          "Parse DSL text and render it back canonically");
    m.def("validate_dsl", [](const std::string& text) {
        std::vector<std::string> out;
        for (const auto& v : validate_graph(parse_dsl(text))) out.push_back(v.str());
        return out;
    });
    m.def("structural_checks", [](const std::string& dsl, int min_operators) {
        auto report = flowcanvas::structural_checks(parse_dsl(dsl), min_operators);
        py::dict d;
        d["has_checker"] = report.has_checker;
        d["has_format"] = report.has_format;
        d["has_min_operators"] = report.has_min_operators;
        d["has_control"] = report.has_control;
        d["node_count"] = report.node_count;
        return d;
    });
    m.def("describe_library", &describe_library);

    // Turn parsing.
    m.def("parse_turn_kind", [](const std::string& text) -> std::string {
        auto parsed = parse_turn(text);
        if (!is_ok(parsed)) return "error: " + parse_error(parsed).message;
        const auto& env = envelope(parsed);
        if (std::holds_alternative<FinishAction>(env.action)) return "finish";
        const auto& edit = std::get<GraphEdit>(env.action);
        if (std::holds_alternative<AddEdit>(edit)) return "add";
        if (std::holds_alternative<DeleteEdit>(edit)) return "delete";
        if (std::holds_alternative<ModifyEdit>(edit)) return "modify";
        if (std::holds_alternative<SetPromptEdit>(edit)) return "set_prompt";
        if (std::holds_alternative<AddParallelEdit>(edit)) return "parallel";
        if (std::holds_alternative<AddConditionalEdit>(edit)) return "conditional";
        return "loop";
    });

    // Metrics.
    m.def("normalize_answer", &normalize_answer);
    m.def("exact_match", &exact_match);
    m.def("f1_score", &f1_score);
    m.def("numeric_accuracy",
          [](const std::string& pred, const std::string& gold, double eps) {
              return numeric_accuracy(pred, gold, eps).score;
          },
          py::arg("pred"), py::arg("gold"), py::arg("epsilon") = 1e-6);
    m.def("pass_at_k", &pass_at_k);

    // Reward.
    m.def("gated_total",
          [](const std::string& dsl, const std::string& profile_name, double r_answer) {
              auto profile = RewardProfile::by_name(profile_name);
              if (!profile) throw std::runtime_error("unknown profile " + profile_name);
              auto report = flowcanvas::structural_checks(parse_dsl(dsl),
                                                          profile->min_operators);
              auto breakdown = diversity_reward(report, *profile);
              breakdown.r_answer = r_answer;
              total_reward(breakdown, *profile);
              return reward_to_dict(breakdown);
          },
          py::arg("dsl"), py::arg("profile") = "table7", py::arg("r_answer") = 0.0);

    // Policy optimization.
    m.def("group_advantages", &group_advantages, py::arg("rewards"), py::arg("sources"),
          py::arg("epsilon") = 1e-8);
    m.def("surrogate_objective",
          [](const std::vector<py::dict>& trajectories, const std::vector<double>& advantages,
             double clip_epsilon, double kl_beta) {
              GroupBatch batch;
              batch.clip_epsilon = clip_epsilon;
              batch.kl_beta = kl_beta;
              for (const auto& t : trajectories) {
                  TrajectoryTokens traj;
                  for (const auto& tok : t["tokens"].cast<std::vector<py::dict>>()) {
                      traj.tokens.push_back(TokenRecord{
                          tok.contains("id") ? tok["id"].cast<int>() : 0,
                          tok["lp_new"].cast<double>(), tok["lp_old"].cast<double>(),
                          tok.contains("lp_ref") ? tok["lp_ref"].cast<double>() : 0.0,
                          tok.contains("mask") ? tok["mask"].cast<int>() : 1});
                  }
                  batch.trajectories.push_back(std::move(traj));
              }
              auto result = flowcanvas::surrogate_objective(batch, advantages);
              py::dict d;
              d["objective"] = result.objective;
              d["surrogate"] = result.surrogate;
              d["kl"] = result.kl;
              return d;
          },
          py::arg("trajectories"), py::arg("advantages"), py::arg("clip_epsilon") = 0.2,
          py::arg("kl_beta") = 0.0);
    m.def("toy_train",
          [](int steps, std::uint64_t seed, bool gated) {
              ToyConfig config;
              config.templates = {{"shortcut", 0.6, 1.0}, {"feasible", 1.0, 0.7}};
              auto trace = flowcanvas::toy_train(config, steps, seed, gated);
              py::dict d;
              d["final_feasible_mass"] = trace.final_feasible_mass;
              d["final_distribution"] = trace.final_distribution;
              return d;
          },
          py::arg("steps") = 500, py::arg("seed") = 0, py::arg("gated") = true);

    // Sandbox.
    m.def("sandbox_execute",
          [](const std::string& code, const std::string& stdin_text, int timeout_ms) {
              SandboxConfig config;
              config.limit = std::chrono::milliseconds(timeout_ms);
              auto res = sandbox_execute(code, stdin_text, config);
              py::dict d;
              const char* status = res.status == SandboxStatus::Ok        ? "ok"
                                   : res.status == SandboxStatus::NonZero ? "nonzero"
                                   : res.status == SandboxStatus::Timeout ? "timeout"
                                                                          : "denied";
              d["status"] = status;
              d["stdout"] = res.stdout_text;
              d["stderr"] = res.stderr_text;
              d["wall_time_ms"] = res.wall_time.count();
              return d;
          },
          py::arg("code"), py::arg("stdin_text") = "", py::arg("timeout_ms") = 30000);

    // Episodes.
    py::class_<CanvasSession>(m, "Canvas")
        .def(py::init<std::string, const std::string&, std::string, int, const std::string&>(),
             py::arg("task"), py::arg("mock_path"), py::arg("profile") = "table7",
             py::arg("max_rounds") = 20, py::arg("tests_path") = "")
        .def("step", &CanvasSession::step)
        .def("phase", &CanvasSession::phase)
        .def("dsl", &CanvasSession::dsl)
        .def("turn_index", &CanvasSession::turn_index)
        .def("truncated", &CanvasSession::truncated)
        .def("observation", &CanvasSession::observation);

    m.def("run_scripted_episode", &run_scripted_episode, py::arg("dataset_path"),
          py::arg("task_id"), py::arg("director_path"), py::arg("mock_path"),
          py::arg("profile") = "appendixC");

    m.attr("__version__") = "0.1.0";
}
