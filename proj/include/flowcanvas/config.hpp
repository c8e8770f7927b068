#pragma once

#include <cstdint>
#include <string>

#include "flowcanvas/canvas.hpp"
#include "flowcanvas/engine.hpp"
#include "flowcanvas/sandbox.hpp"

namespace flowcanvas {

struct GenerationParams {
    double temperature = 0.6;
    double top_p = 0.95;
    int top_k = 20;
    int max_new_tokens = 2048;
};

/// Episode/run configuration. Every environment-relevant row of the default
/// hyperparameter table has a named key here; see load_config for the file
/// format.
struct RunConfig {
    EpisodeLimits limits;  // max_rounds=20, max_context_tokens=16384
    std::string profile = "table7";
    SandboxConfig sandbox;       // sandbox_timeout_s (default 30)
    EngineLimits engine;         // execution_timeout_s (600), per-node cap (120)
    double executor_temperature = 0.0;
    GenerationParams generation;
    bool record_timings = false;
    bool execute_truncated = false;  // also execute graphs cut off at T_max
    std::string backend_endpoint;    // HTTP backend when set
    std::string backend_model = "default";
    std::string api_key_env = "FLOWCANVAS_API_KEY";
    std::uint64_t seed = 0;
    int parallel = 1;
};

/// Parses a key = value file ('#' comments, blank lines ignored). Unknown
/// keys are an error so typos fail loudly. Keys:
///   max_rounds, max_context_tokens, profile,
///   min_operators_for_finish, require_checker, require_control,
///   require_format_last, weight_checker, weight_format, weight_operator,
///   weight_control, reward_base, reward_cap, answer_gate,
///   executor_temperature, execution_timeout_s, per_node_timeout_s,
///   sandbox_timeout_s, generation_temperature, generation_top_p,
///   generation_top_k, generation_max_tokens, record_timings,
///   execute_truncated, backend_endpoint, backend_model, api_key_env,
///   seed, parallel
/// Profile keys (min_operators_for_finish, require_*, weight_*) override the
/// named profile's values.
struct LoadedConfig {
    RunConfig run;
    RewardProfile profile;
};

LoadedConfig load_config(const std::string& path);
LoadedConfig default_config();

}  // namespace flowcanvas
