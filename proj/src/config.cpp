#include "flowcanvas/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace flowcanvas {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("not a boolean: " + v);
}

int weight_to_centi(const std::string& v) {
    double w = std::stod(v);
    if (w < 0.0 || w > 1.0) throw std::runtime_error("weight out of [0,1]: " + v);
    return static_cast<int>(std::llround(w * 100.0));
}

}  // namespace

LoadedConfig default_config() {
    LoadedConfig cfg;
    cfg.profile = RewardProfile::table7();
    cfg.run.sandbox.limit = std::chrono::milliseconds(30000);
    cfg.run.engine.total = std::chrono::milliseconds(600000);
    cfg.run.engine.per_node = std::chrono::milliseconds(120000);
    return cfg;
}

LoadedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);

    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    LoadedConfig cfg = default_config();
    if (auto it = kv.find("profile"); it != kv.end()) {
        auto profile = RewardProfile::by_name(it->second);
        if (!profile) throw std::runtime_error("unknown profile: " + it->second);
        cfg.profile = *profile;
        cfg.run.profile = it->second;
    }

    for (const auto& [key, value] : kv) {
        if (key == "profile") continue;
        if (key == "max_rounds") cfg.run.limits.max_rounds = std::stoi(value);
        else if (key == "max_context_tokens") cfg.run.limits.max_context_tokens = std::stoi(value);
        else if (key == "min_operators_for_finish") cfg.profile.min_operators = std::stoi(value);
        else if (key == "require_checker") cfg.profile.require_checker = parse_bool(value);
        else if (key == "require_control") cfg.profile.require_control = parse_bool(value);
        else if (key == "require_format_last") cfg.profile.require_format_last = parse_bool(value);
        else if (key == "weight_checker") cfg.profile.w_checker_centi = weight_to_centi(value);
        else if (key == "weight_format") cfg.profile.w_format_centi = weight_to_centi(value);
        else if (key == "weight_operator") cfg.profile.w_operator_centi = weight_to_centi(value);
        else if (key == "weight_control") cfg.profile.w_control_centi = weight_to_centi(value);
        else if (key == "reward_base") cfg.profile.base = std::stod(value);
        else if (key == "reward_cap") cfg.profile.cap = std::stod(value);
        else if (key == "answer_gate") {
            // The gate is structural (diversity == cap); the key is accepted
            // for completeness but only 'true' is supported.
            if (!parse_bool(value)) {
                throw std::runtime_error("answer_gate=false is not supported");
            }
        } else if (key == "executor_temperature") cfg.run.executor_temperature = std::stod(value);
        else if (key == "execution_timeout_s")
            cfg.run.engine.total = std::chrono::seconds(std::stoi(value));
        else if (key == "per_node_timeout_s")
            cfg.run.engine.per_node = std::chrono::seconds(std::stoi(value));
        else if (key == "sandbox_timeout_s")
            cfg.run.sandbox.limit = std::chrono::seconds(std::stoi(value));
        else if (key == "generation_temperature") cfg.run.generation.temperature = std::stod(value);
        else if (key == "generation_top_p") cfg.run.generation.top_p = std::stod(value);
        else if (key == "generation_top_k") cfg.run.generation.top_k = std::stoi(value);
        else if (key == "generation_max_tokens")
            cfg.run.generation.max_new_tokens = std::stoi(value);
        else if (key == "record_timings") cfg.run.record_timings = parse_bool(value);
        else if (key == "execute_truncated") cfg.run.execute_truncated = parse_bool(value);
        else if (key == "backend_endpoint") cfg.run.backend_endpoint = value;
        else if (key == "backend_model") cfg.run.backend_model = value;
        else if (key == "api_key_env") cfg.run.api_key_env = value;
        else if (key == "seed") cfg.run.seed = std::stoull(value);
        else if (key == "parallel") cfg.run.parallel = std::stoi(value);
        else throw std::runtime_error("unknown config key: " + key);
    }
    return cfg;
}

}  // namespace flowcanvas
