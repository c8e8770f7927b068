#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "flowcanvas/config.hpp"
#include "flowcanvas/runner.hpp"
#include "flowcanvas/toy_lab.hpp"

using namespace flowcanvas;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string dataset_path;
    std::string policy = "stdin";
    std::string profile;
    std::string mock_path;
    std::string out_path;
    std::uint64_t seed = 0;
    int parallel = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    cmd->add_option("--dataset", args.dataset_path, "JSONL dataset of task records");
    cmd->add_option("--policy", args.policy, "director: http, script:<path>, or stdin");
    cmd->add_option("--profile", args.profile, "reward profile: table7 or appendixC");
    cmd->add_option("--mock", args.mock_path, "JSONL mock backend fixture");
    cmd->add_option("--out", args.out_path, "output file");
    cmd->add_option("--seed", args.seed, "run seed recorded into trajectories");
    cmd->add_option("--parallel", args.parallel, "max concurrent episodes");
}

LoadedConfig resolve_config(const CommonArgs& args) {
    LoadedConfig cfg = args.config_path.empty() ? default_config() : load_config(args.config_path);
    if (!args.profile.empty()) {
        auto profile = RewardProfile::by_name(args.profile);
        if (!profile) throw std::runtime_error("unknown profile: " + args.profile);
        cfg.profile = *profile;
        cfg.run.profile = args.profile;
    }
    if (args.seed) cfg.run.seed = args.seed;
    if (args.parallel > 1) cfg.run.parallel = args.parallel;
    return cfg;
}

PolicyFactory make_policy_factory(const CommonArgs& args, const LoadedConfig& cfg) {
    if (args.policy == "stdin") {
        return [](const DatasetRecord&, int) { return std::make_unique<StdinDirector>(); };
    }
    if (args.policy == "http") {
        HttpBackendConfig http;
        http.endpoint = cfg.run.backend_endpoint;
        http.model = cfg.run.backend_model;
        http.api_key_env = cfg.run.api_key_env;
        if (http.endpoint.empty()) {
            throw std::runtime_error("--policy http needs backend_endpoint in the config");
        }
        GenerationParams gen = cfg.run.generation;
        return [http, gen](const DatasetRecord&, int) {
            return std::make_unique<HttpDirector>(http, gen);
        };
    }
    if (args.policy.rfind("script:", 0) == 0) {
        std::string path = args.policy.substr(7);
        return [path](const DatasetRecord& record, int) {
            return std::make_unique<ScriptedDirector>(ScriptedDirector::load(path, record.task_id));
        };
    }
    throw std::runtime_error("unknown policy: " + args.policy);
}

BackendFactory make_backend_factory(const CommonArgs& args, const LoadedConfig& cfg) {
    if (!args.mock_path.empty()) {
        std::string path = args.mock_path;
        return [path](const DatasetRecord& record) -> std::unique_ptr<Backend> {
            return MockBackend::from_file(path, record.task_id);
        };
    }
    if (cfg.run.backend_endpoint.empty()) {
        throw std::runtime_error("no backend: pass --mock or set backend_endpoint");
    }
    HttpBackendConfig http;
    http.endpoint = cfg.run.backend_endpoint;
    http.model = cfg.run.backend_model;
    http.api_key_env = cfg.run.api_key_env;
    return [http](const DatasetRecord&) -> std::unique_ptr<Backend> {
        return std::make_unique<HttpBackend>(http);
    };
}

std::vector<DatasetRecord> require_dataset(const CommonArgs& args) {
    if (args.dataset_path.empty()) throw std::runtime_error("--dataset is required");
    auto records = load_dataset(args.dataset_path);
    if (records.empty()) throw std::runtime_error("dataset is empty");
    return records;
}

int cmd_run(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    auto records = require_dataset(args);
    auto policies = make_policy_factory(args, cfg);
    auto backends = make_backend_factory(args, cfg);
    for (const auto& record : records) {
        auto policy = policies(record, 0);
        auto backend = backends(record);
        auto traj = run_episode(record, *policy, cfg.run, cfg.profile, *backend, args.mock_path);
        std::cout << record.task_id << ": " << traj.final_dsl << "\n  answer: " << traj.answer
                  << "\n  reward: " << traj.reward.total
                  << (traj.truncated ? " (truncated)" : "") << "\n";
        if (!args.out_path.empty()) {
            append_trajectory(args.out_path, traj, cfg.run.record_timings);
        }
    }
    return 0;
}

int cmd_collect(const CommonArgs& args, int group_size) {
    auto cfg = resolve_config(args);
    auto records = require_dataset(args);
    auto policies = make_policy_factory(args, cfg);
    auto backends = make_backend_factory(args, cfg);
    for (const auto& record : records) {
        auto result = collect_group(record, policies, backends, group_size, cfg.run, cfg.profile,
                                    args.mock_path);
        std::cout << record.task_id << ": " << result.trajectories.size()
                  << " trajectories, advantages";
        for (double a : result.advantages) std::cout << " " << a;
        std::cout << "\n";
        if (!args.out_path.empty()) {
            for (const auto& traj : result.trajectories) {
                append_trajectory(args.out_path, traj, cfg.run.record_timings);
            }
        }
    }
    return 0;
}

int cmd_replay(const CommonArgs& args, const std::string& in_path) {
    auto report = replay_episode(in_path, args.mock_path);
    if (report.divergences.empty()) {
        std::cout << report.episodes << " episode(s), 0 divergences\n";
        return 0;
    }
    for (const auto& d : report.divergences) {
        std::cout << "divergence in " << d.task_id << " at turn " << d.turn
                  << "\n  recorded:    " << d.expected << "\n  regenerated: " << d.actual << "\n";
    }
    return 1;
}

int cmd_eval(const CommonArgs& args) {
    auto cfg = resolve_config(args);
    auto records = require_dataset(args);
    auto policies = make_policy_factory(args, cfg);
    auto backends = make_backend_factory(args, cfg);
    auto summary = eval_dataset(records, policies, backends, cfg.run, cfg.profile,
                                args.mock_path);
    std::cout << summary.table();
    if (!args.out_path.empty()) {
        std::ofstream out(args.out_path);
        out << summary.to_json().dump(2) << "\n";
    }
    return summary.failures == 0 ? 0 : 1;
}

int cmd_reward(const CommonArgs& args, const std::string& in_path) {
    auto cfg = resolve_config(args);
    for (const auto& traj : load_trajectories(in_path)) {
        auto breakdown = recompute_reward(traj, cfg.profile, cfg.run.sandbox);
        std::cout << traj.task_id << ": recorded " << traj.reward.total << " -> "
                  << cfg.profile.name << " " << breakdown.total
                  << " (diversity " << breakdown.r_diversity << ", answer "
                  << breakdown.r_answer << ")\n";
        if (!args.out_path.empty()) {
            Trajectory updated = traj;
            updated.reward = breakdown;
            updated.profile_name = cfg.profile.name;
            append_trajectory(args.out_path, updated, cfg.run.record_timings);
        }
    }
    return 0;
}

int cmd_toy_train(const CommonArgs& args, int steps, bool ungated) {
    ToyConfig config;
    config.templates = {
        {"shortcut", 0.6, 1.0},
        {"feasible", 1.0, 0.7},
    };
    auto trace = toy_train(config, steps, args.seed, !ungated);
    std::cout << (ungated ? "ungated" : "gated") << " training, " << steps << " steps, seed "
              << args.seed << "\n";
    std::cout << "final feasible mass: " << trace.final_feasible_mass << "\n";
    for (std::size_t i = 0; i < trace.final_distribution.size(); ++i) {
        std::cout << "  " << config.templates[i].name << ": " << trace.final_distribution[i]
                  << "\n";
    }
    if (!args.out_path.empty()) {
        nlohmann::json j;
        j["gated"] = !ungated;
        j["seed"] = args.seed;
        j["final_feasible_mass"] = trace.final_feasible_mass;
        j["steps"] = nlohmann::json::array();
        for (const auto& s : trace.steps) {
            j["steps"].push_back({{"feasible_mass", s.feasible_mass}, {"objective", s.objective}});
        }
        std::ofstream out(args.out_path);
        out << j.dump(2) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"workflow-canvas episode runner"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string in_path;
    int group_size = 4;
    int toy_steps = 500;
    bool ungated = false;

    auto* run = app.add_subcommand("run", "run one episode per dataset record");
    add_common(run, args);
    auto* collect = app.add_subcommand("collect", "collect trajectory groups for training");
    add_common(collect, args);
    collect->add_option("--group", group_size, "episodes per record (N >= 2)");
    auto* replay = app.add_subcommand("replay", "verify recorded episodes against the canvas");
    add_common(replay, args);
    replay->add_option("--in", in_path, "trajectory JSONL")->required();
    auto* eval = app.add_subcommand("eval", "run a dataset and report metrics");
    add_common(eval, args);
    auto* reward = app.add_subcommand("reward", "recompute rewards under another profile");
    add_common(reward, args);
    reward->add_option("--in", in_path, "trajectory JSONL")->required();
    auto* toy = app.add_subcommand("toy-train", "policy-lab training demo");
    add_common(toy, args);
    toy->add_option("--steps", toy_steps, "training steps");
    toy->add_flag("--ungated", ungated, "answer-only reward (no diversity gate)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(args);
        if (collect->parsed()) return cmd_collect(args, group_size);
        if (replay->parsed()) return cmd_replay(args, in_path);
        if (eval->parsed()) return cmd_eval(args);
        if (reward->parsed()) return cmd_reward(args, in_path);
        if (toy->parsed()) return cmd_toy_train(args, toy_steps, ungated);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
