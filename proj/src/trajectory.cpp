#include "flowcanvas/trajectory.hpp"

#include <fstream>

namespace flowcanvas {

namespace {

nlohmann::json transcript_to_json(const NodeTranscript& t, bool include_timings) {
    nlohmann::json j;
    j["node_id"] = t.node_id;
    j["op"] = t.op;
    j["iteration"] = t.iteration;
    j["prompt"] = t.prompt;
    j["request"] = t.request;
    j["response"] = t.response;
    if (t.sandbox) {
        j["sandbox"] = {
            {"status", static_cast<int>(t.sandbox->status)},
            {"stdout", t.sandbox->stdout_text},
            {"stderr", t.sandbox->stderr_text},
            {"wall_time_ms", include_timings ? t.sandbox->wall_time.count() : 0},
        };
    }
    j["outputs"] = t.outputs;
    j["warnings"] = t.warnings;
    j["errored"] = t.errored;
    j["wall_time_ms"] = include_timings ? t.wall_time.count() : 0;
    return j;
}

NodeTranscript transcript_from_json(const nlohmann::json& j) {
    NodeTranscript t;
    t.node_id = j.value("node_id", "");
    t.op = j.value("op", "");
    t.iteration = j.value("iteration", 0);
    t.prompt = j.value("prompt", "");
    t.request = j.value("request", "");
    t.response = j.value("response", "");
    if (j.contains("sandbox")) {
        SandboxResult s;
        s.status = static_cast<SandboxStatus>(j["sandbox"].value("status", 0));
        s.stdout_text = j["sandbox"].value("stdout", "");
        s.stderr_text = j["sandbox"].value("stderr", "");
        s.wall_time = std::chrono::milliseconds(j["sandbox"].value("wall_time_ms", 0));
        t.sandbox = s;
    }
    if (j.contains("outputs")) t.outputs = j["outputs"].get<SlotMap>();
    if (j.contains("warnings")) t.warnings = j["warnings"].get<std::vector<std::string>>();
    t.errored = j.value("errored", false);
    t.wall_time = std::chrono::milliseconds(j.value("wall_time_ms", 0));
    return t;
}

}  // namespace

nlohmann::json to_json(const Trajectory& traj, bool include_timings) {
    nlohmann::json j;
    j["schema_version"] = traj.schema_version;
    j["task_id"] = traj.task_id;
    j["source"] = traj.source;
    j["task"] = traj.task;
    j["gold"] = traj.gold;
    j["task_type"] = traj.task_type;
    j["turns"] = nlohmann::json::array();
    for (const auto& t : traj.turns) {
        j["turns"].push_back(
            {{"think", t.think}, {"action", t.action_raw}, {"feedback", t.feedback_raw}});
    }
    j["final_dsl"] = traj.final_dsl;
    j["answer"] = traj.answer;
    j["reward"] = {
        {"r_checker", traj.reward.r_checker},     {"r_format", traj.reward.r_format},
        {"r_operator", traj.reward.r_operator},   {"r_control", traj.reward.r_control},
        {"r_diversity", traj.reward.r_diversity}, {"gate_open", traj.reward.gate_open},
        {"r_answer", traj.reward.r_answer},       {"total", traj.reward.total},
    };
    j["truncated"] = traj.truncated;
    j["answer_from_fallback"] = traj.answer_from_fallback;
    j["transcripts"] = nlohmann::json::array();
    for (const auto& t : traj.transcripts) {
        j["transcripts"].push_back(transcript_to_json(t, include_timings));
    }
    if (!traj.tokens.empty()) {
        j["tokens"] = nlohmann::json::array();
        for (const auto& tok : traj.tokens) {
            j["tokens"].push_back({{"id", tok.token_id},
                                   {"lp_new", tok.logprob_new},
                                   {"lp_old", tok.logprob_old},
                                   {"lp_ref", tok.logprob_ref},
                                   {"mask", tok.mask}});
        }
    }
    j["config"] = {
        {"profile", traj.profile_name},
        {"max_rounds", traj.max_rounds},
        {"max_context_tokens", traj.max_context_tokens},
        {"mock_path", traj.mock_path},
        {"seed", traj.seed},
    };
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    int version = j.value("schema_version", -1);
    if (version != kTrajectorySchemaVersion) {
        throw SchemaVersionMismatch("trajectory schema version " + std::to_string(version) +
                                    ", expected " + std::to_string(kTrajectorySchemaVersion));
    }
    Trajectory traj;
    traj.task_id = j.value("task_id", "");
    traj.source = j.value("source", "");
    traj.task = j.value("task", "");
    traj.gold = j.value("gold", "");
    traj.task_type = j.value("task_type", "");
    for (const auto& t : j.value("turns", nlohmann::json::array())) {
        traj.turns.push_back(TurnEntry{t.value("think", ""), t.value("action", ""),
                                       t.value("feedback", "")});
    }
    traj.final_dsl = j.value("final_dsl", "");
    traj.answer = j.value("answer", "");
    if (j.contains("reward")) {
        const auto& r = j["reward"];
        traj.reward.r_checker = r.value("r_checker", 0.0);
        traj.reward.r_format = r.value("r_format", 0.0);
        traj.reward.r_operator = r.value("r_operator", 0.0);
        traj.reward.r_control = r.value("r_control", 0.0);
        traj.reward.r_diversity = r.value("r_diversity", 0.0);
        traj.reward.gate_open = r.value("gate_open", false);
        traj.reward.r_answer = r.value("r_answer", 0.0);
        traj.reward.total = r.value("total", 0.0);
    }
    traj.truncated = j.value("truncated", false);
    traj.answer_from_fallback = j.value("answer_from_fallback", false);
    for (const auto& t : j.value("transcripts", nlohmann::json::array())) {
        traj.transcripts.push_back(transcript_from_json(t));
    }
    for (const auto& tok : j.value("tokens", nlohmann::json::array())) {
        traj.tokens.push_back(TokenRecord{tok.value("id", 0), tok.value("lp_new", 0.0),
                                          tok.value("lp_old", 0.0), tok.value("lp_ref", 0.0),
                                          tok.value("mask", 1)});
    }
    if (j.contains("config")) {
        const auto& c = j["config"];
        traj.profile_name = c.value("profile", "table7");
        traj.max_rounds = c.value("max_rounds", 20);
        traj.max_context_tokens = c.value("max_context_tokens", 16384);
        traj.mock_path = c.value("mock_path", "");
        traj.seed = c.value("seed", std::uint64_t{0});
    }
    return traj;
}

void append_trajectory(const std::string& path, const Trajectory& traj, bool include_timings) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot open for append: " + path);
    out << to_json(traj, include_timings).dump() << "\n";
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
    }
    return out;
}

}  // namespace flowcanvas
