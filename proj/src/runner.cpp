#include "flowcanvas/runner.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "flowcanvas/dsl.hpp"
#include "flowcanvas/metrics.hpp"

namespace flowcanvas {

ScriptedDirector::ScriptedDirector(std::vector<ScriptTurn> turns) : turns_(std::move(turns)) {}

std::vector<ScriptTurn> ScriptedDirector::load(const std::string& path,
                                               const std::string& task_filter) {
    std::ifstream in(path);
    if (!in) throw PolicyFailure("cannot open director script: " + path);
    std::vector<ScriptTurn> turns;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line);
        if (j.contains("task_id") && j.at("task_id").get<std::string>() != task_filter) continue;
        ScriptTurn turn;
        turn.text = j.at("turn").get<std::string>();
        if (j.contains("logprob")) turn.logprob = j.at("logprob").get<double>();
        turns.push_back(std::move(turn));
    }
    return turns;
}

std::string ScriptedDirector::next_turn(const std::string& history) {
    (void)history;
    if (next_ >= turns_.size()) {
        throw PolicyFailure("scripted director exhausted after " + std::to_string(next_) +
                            " turns");
    }
    const ScriptTurn& turn = turns_[next_++];
    last_tokens_.clear();
    if (turn.logprob) {
        last_tokens_.push_back(
            TokenRecord{static_cast<int>(next_ - 1), *turn.logprob, *turn.logprob,
                        *turn.logprob, 1});
    }
    return turn.text;
}

std::vector<TokenRecord> ScriptedDirector::last_turn_tokens() { return last_tokens_; }

HttpDirector::HttpDirector(HttpBackendConfig config, GenerationParams generation)
    : backend_(std::move(config)), generation_(generation) {}

std::string HttpDirector::next_turn(const std::string& history) {
    BackendRequest req;
    req.op_kind = "director";
    req.temperature = generation_.temperature;
    req.max_output = generation_.max_new_tokens;
    req.messages.emplace_back("user", history);
    try {
        return backend_.complete(req).text;
    } catch (const BackendError& e) {
        throw PolicyFailure(e.what());
    }
}

std::string StdinDirector::next_turn(const std::string& history) {
    std::cout << "\n----- observation -----\n" << history << "\n----- your turn -----\n"
              << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) throw PolicyFailure("stdin closed");
    return line;
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::vector<DatasetRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line);
        DatasetRecord rec;
        rec.task_id = j.at("task_id").get<std::string>();
        rec.source = j.value("source", "default");
        rec.task = j.at("task").get<std::string>();
        rec.gold = j.value("gold", "");
        auto type = task_type_from_name(j.value("task_type", "qa_em"));
        if (!type) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": unknown task_type");
        }
        rec.task_type = *type;
        if (rec.task_type == TaskType::CodePass && !rec.gold.empty() &&
            rec.gold.front() != '/') {
            // Test-suite references resolve against the dataset file itself.
            auto dir = std::filesystem::path(path).parent_path();
            rec.gold = (dir / rec.gold).lexically_normal().string();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

namespace {

std::string read_file_or_empty(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// For code tasks the scored prediction is the last program produced by the
// workflow, not the textual answer.
std::string code_prediction(const ExecutionResult& exec) {
    for (auto it = exec.transcripts.rbegin(); it != exec.transcripts.rend(); ++it) {
        for (const char* slot : {"code", "revised_solution", "solution"}) {
            auto found = it->outputs.find(slot);
            if (found != it->outputs.end() && !found->second.empty()) return found->second;
        }
    }
    return exec.answer;
}

}  // namespace

Trajectory run_episode(const DatasetRecord& record, PolicyAdapter& policy,
                       const RunConfig& config, const RewardProfile& profile,
                       Backend& backend, const std::string& mock_path) {
    Canvas::Setup setup;
    setup.task = record.task;
    setup.limits = config.limits;
    setup.backend = &backend;
    setup.sandbox = config.sandbox;
    setup.engine_limits = config.engine;
    setup.executor_temperature = config.executor_temperature;
    if (record.task_type == TaskType::CodePass && !record.gold.empty()) {
        setup.tests_text = read_file_or_empty(record.gold);
    }
    Canvas canvas(std::move(setup));

    Trajectory traj;
    traj.task_id = record.task_id;
    traj.source = record.source;
    traj.task = record.task;
    traj.gold = record.gold;
    traj.task_type = task_type_name(record.task_type);
    traj.profile_name = profile.name;
    traj.max_rounds = config.limits.max_rounds;
    traj.max_context_tokens = config.limits.max_context_tokens;
    traj.mock_path = mock_path;
    traj.seed = config.seed;

    CanvasState state = canvas.initial_state();
    while (state.phase != Phase::FINISHED && state.turn_index < config.limits.max_rounds) {
        std::string raw = policy.next_turn(canvas.render_history(state));
        auto parsed = parse_turn(raw);
        Canvas::StepResult step = is_ok(parsed)
                                      ? canvas.step(state, envelope(parsed), profile)
                                      : canvas.step_invalid(state, raw,
                                                            parse_error(parsed).message, profile);
        state = std::move(step.state);
        auto turn_tokens = policy.last_turn_tokens();
        if (!turn_tokens.empty()) {
            for (const auto& tok : turn_tokens) traj.tokens.push_back(tok);
            // The feedback enters the stream masked out.
            traj.tokens.push_back(TokenRecord{-1, 0.0, 0.0, 0.0, 0});
        }
    }

    traj.truncated = state.truncated || state.phase != Phase::FINISHED;
    traj.final_dsl = render_dsl(state.graph);
    for (const auto& turn : state.history) traj.turns.push_back(turn);

    auto report = structural_checks(state.graph, profile.min_operators);
    traj.reward = diversity_reward(report, profile);

    bool execute = (!traj.truncated) || config.execute_truncated;
    if (execute && !state.graph.empty()) {
        EngineContext ctx;
        ctx.temperature = config.executor_temperature;
        ctx.sandbox = config.sandbox;
        ctx.limits = config.engine;
        ctx.tests_text = canvas.setup().tests_text;
        try {
            auto exec = execute_workflow(state.graph, record.task, backend, ctx);
            traj.answer = exec.answer;
            traj.answer_from_fallback = exec.answer_from_fallback;
            traj.transcripts = exec.transcripts;
            if (!traj.truncated && !record.gold.empty()) {
                std::string prediction = record.task_type == TaskType::CodePass
                                             ? code_prediction(exec)
                                             : exec.answer;
                auto score = answer_reward(prediction, record.gold, record.task_type,
                                           config.sandbox);
                traj.reward.r_answer = score.value;
            }
        } catch (const std::exception& e) {
            traj.answer.clear();
            traj.answer_from_fallback = true;
            NodeTranscript failure;
            failure.node_id = "(workflow)";
            failure.errored = true;
            failure.warnings.push_back(e.what());
            traj.transcripts.push_back(std::move(failure));
        }
    }
    total_reward(traj.reward, profile);
    return traj;
}

CollectResult collect_group(const DatasetRecord& record, const PolicyFactory& policies,
                            const BackendFactory& backends, int n, const RunConfig& config,
                            const RewardProfile& profile, const std::string& mock_path) {
    if (n < 2) throw EmptyGroup("group size must be >= 2 for advantage normalization");

    // Episodes are independent (fresh adapter and backend each); run them in
    // waves of config.parallel and collect by index. Any failure rejects the
    // whole group.
    std::vector<Trajectory> episodes(n);
    int wave = std::max(1, config.parallel);
    for (int base = 0; base < n; base += wave) {
        int count = std::min(wave, n - base);
        std::vector<std::future<Trajectory>> futures;
        futures.reserve(count);
        for (int i = 0; i < count; ++i) {
            int index = base + i;
            futures.push_back(std::async(
                count == 1 ? std::launch::deferred : std::launch::async, [&, index] {
                    auto policy = policies(record, index);
                    auto backend = backends(record);
                    return run_episode(record, *policy, config, profile, *backend, mock_path);
                }));
        }
        for (int i = 0; i < count; ++i) episodes[base + i] = futures[i].get();
    }

    CollectResult result;
    std::vector<double> rewards;
    std::vector<std::string> sources;
    for (auto& traj : episodes) {
        rewards.push_back(traj.reward.total);
        sources.push_back(traj.source);
        TrajectoryTokens tokens;
        tokens.source = traj.source;
        tokens.reward = traj.reward.total;
        tokens.tokens = traj.tokens;
        result.batch.trajectories.push_back(std::move(tokens));
        result.trajectories.push_back(std::move(traj));
    }
    result.advantages = group_advantages(rewards, sources, result.batch.epsilon);
    return result;
}

ReplayReport replay_one(const Trajectory& traj, const std::string& mock_override) {
    std::string mock_path = mock_override.empty() ? traj.mock_path : mock_override;
    if (mock_path.empty()) {
        throw std::runtime_error("trajectory " + traj.task_id +
                                 " was not mock-backed; replay needs --mock");
    }
    auto backend = MockBackend::from_file(mock_path, traj.task_id);
    auto profile = RewardProfile::by_name(traj.profile_name);
    if (!profile) throw std::runtime_error("unknown profile in trajectory: " + traj.profile_name);

    Canvas::Setup setup;
    setup.task = traj.task;
    setup.limits.max_rounds = traj.max_rounds;
    setup.limits.max_context_tokens = traj.max_context_tokens;
    setup.backend = backend.get();
    auto type = task_type_from_name(traj.task_type);
    if (type && *type == TaskType::CodePass && !traj.gold.empty()) {
        setup.tests_text = read_file_or_empty(traj.gold);
    }
    Canvas canvas(std::move(setup));

    ReplayReport report;
    report.episodes = 1;
    CanvasState state = canvas.initial_state();
    for (std::size_t i = 0; i < traj.turns.size(); ++i) {
        const auto& recorded = traj.turns[i];
        auto parsed = parse_turn(recorded.action_raw);
        Canvas::StepResult step =
            is_ok(parsed) ? canvas.step(state, envelope(parsed), *profile)
                          : canvas.step_invalid(state, recorded.action_raw,
                                                parse_error(parsed).message, *profile);
        state = std::move(step.state);
        if (step.feedback.raw != recorded.feedback_raw) {
            report.divergences.push_back({traj.task_id, static_cast<int>(i + 1),
                                          recorded.feedback_raw, step.feedback.raw});
            return report;  // first divergence is the report
        }
    }
    std::string final_dsl = render_dsl(state.graph);
    if (final_dsl != traj.final_dsl) {
        report.divergences.push_back(
            {traj.task_id, static_cast<int>(traj.turns.size()), traj.final_dsl, final_dsl});
    }
    return report;
}

ReplayReport replay_episode(const std::string& trajectory_path, const std::string& mock_override) {
    ReplayReport report;
    for (const auto& traj : load_trajectories(trajectory_path)) {
        auto one = replay_one(traj, mock_override);
        report.episodes += one.episodes;
        for (auto& d : one.divergences) report.divergences.push_back(std::move(d));
    }
    return report;
}

namespace {

void accumulate_metric(std::optional<double>& cell, double value, int count_so_far) {
    if (!cell) {
        cell = value;
    } else {
        *cell = (*cell * count_so_far + value) / (count_so_far + 1);
    }
}

}  // namespace

std::string EvalSummary::table() const {
    std::ostringstream out;
    out << "source            n  fail     EM     F1    Acc  Pass@1  reward(mean/min/max)\n";
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("     -");
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%6.3f", *v);
        return std::string(buf);
    };
    for (const auto& [source, m] : per_source) {
        char line[160];
        std::snprintf(line, sizeof(line), "%-16s %3d %5d %s %s %s  %s  %.3f/%.3f/%.3f\n",
                      source.c_str(), m.count, m.failures, cell(m.em).c_str(),
                      cell(m.f1).c_str(), cell(m.accuracy).c_str(), cell(m.pass1).c_str(),
                      m.reward_mean, m.reward_min, m.reward_max);
        out << line;
    }
    out << "total records: " << total << ", failures: " << failures << "\n";
    return out.str();
}

nlohmann::json EvalSummary::to_json() const {
    nlohmann::json j;
    j["total"] = total;
    j["failures"] = failures;
    j["per_source"] = nlohmann::json::object();
    for (const auto& [source, m] : per_source) {
        nlohmann::json s;
        s["count"] = m.count;
        s["failures"] = m.failures;
        if (m.em) s["em"] = *m.em;
        if (m.f1) s["f1"] = *m.f1;
        if (m.accuracy) s["accuracy"] = *m.accuracy;
        if (m.pass1) s["pass1"] = *m.pass1;
        s["reward_mean"] = m.reward_mean;
        s["reward_min"] = m.reward_min;
        s["reward_max"] = m.reward_max;
        j["per_source"][source] = s;
    }
    return j;
}

EvalSummary eval_dataset(const std::vector<DatasetRecord>& records,
                         const PolicyFactory& policies, const BackendFactory& backends,
                         const RunConfig& config, const RewardProfile& profile,
                         const std::string& mock_path,
                         std::vector<Trajectory>* out_trajectories) {
    if (records.empty()) throw std::runtime_error("empty dataset");
    EvalSummary summary;
    for (const auto& record : records) {
        summary.total++;
        auto& m = summary.per_source[record.source];
        try {
            auto policy = policies(record, 0);
            auto backend = backends(record);
            auto traj = run_episode(record, *policy, config, profile, *backend, mock_path);

            int scored = m.count;
            switch (record.task_type) {
                case TaskType::QA_EM:
                case TaskType::QA_F1:
                    accumulate_metric(m.em, exact_match(traj.answer, record.gold), scored);
                    accumulate_metric(m.f1, f1_score(traj.answer, record.gold), scored);
                    break;
                case TaskType::MathAccuracy:
                    accumulate_metric(m.accuracy,
                                      numeric_accuracy(traj.answer, record.gold).score, scored);
                    break;
                case TaskType::CodePass:
                    accumulate_metric(m.pass1, traj.reward.r_answer, scored);
                    break;
            }
            double r = traj.reward.total;
            m.reward_mean = (m.reward_mean * m.count + r) / (m.count + 1);
            if (m.count == 0 || r < m.reward_min) m.reward_min = r;
            if (m.count == 0 || r > m.reward_max) m.reward_max = r;
            m.count++;
            if (out_trajectories) out_trajectories->push_back(std::move(traj));
        } catch (const std::exception& e) {
            m.failures++;
            summary.failures++;
            std::cerr << "episode failed for " << record.task_id << ": " << e.what() << "\n";
        }
    }
    return summary;
}

RewardBreakdown recompute_reward(const Trajectory& traj, const RewardProfile& profile,
                                 const SandboxConfig& sandbox) {
    auto graph = parse_dsl(traj.final_dsl);
    auto report = structural_checks(graph, profile.min_operators);
    RewardBreakdown breakdown = diversity_reward(report, profile);
    auto type = task_type_from_name(traj.task_type);
    if (!traj.truncated && type && !traj.gold.empty() && !traj.answer.empty()) {
        std::string prediction = traj.answer;
        if (*type == TaskType::CodePass) {
            for (auto it = traj.transcripts.rbegin(); it != traj.transcripts.rend(); ++it) {
                for (const char* slot : {"code", "revised_solution", "solution"}) {
                    auto found = it->outputs.find(slot);
                    if (found != it->outputs.end() && !found->second.empty()) {
                        prediction = found->second;
                        goto found_code;
                    }
                }
            }
        found_code:;
        }
        breakdown.r_answer = answer_reward(prediction, traj.gold, *type, sandbox).value;
    }
    total_reward(breakdown, profile);
    return breakdown;
}

}  // namespace flowcanvas
