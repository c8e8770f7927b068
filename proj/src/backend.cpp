#include "flowcanvas/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace flowcanvas {

std::unique_ptr<MockBackend> MockBackend::from_file(const std::string& path,
                                                    const std::string& task_filter) {
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open mock fixture: " + path);
    auto mock = std::make_unique<MockBackend>();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no++;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError("mock fixture " + path + ":" + std::to_string(line_no) + ": " +
                               e.what());
        }
        if (j.contains("task_id") && j.at("task_id").get<std::string>() != task_filter) continue;
        mock->add_response(j.at("kind").get<std::string>(), j.at("ordinal").get<int>(),
                           j.at("response").get<std::string>());
    }
    return mock;
}

void MockBackend::add_response(const std::string& kind, int ordinal,
                               const std::string& response) {
    std::lock_guard lock(mutex_);
    script_[{kind, ordinal}] = response;
}

BackendResponse MockBackend::complete(const BackendRequest& request) {
    std::lock_guard lock(mutex_);
    int ordinal = ++counters_[request.op_kind];
    auto it = script_.find({request.op_kind, ordinal});
    if (it == script_.end()) {
        throw MockScriptExhausted("mock script exhausted for (" + request.op_kind + ", " +
                                  std::to_string(ordinal) + ")");
    }
    BackendResponse res;
    res.text = it->second;
    return res;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

BackendResponse HttpBackend::complete(const BackendRequest& request) {
    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_output;
    body["messages"] = nlohmann::json::array();
    for (const auto& [role, text] : request.messages) {
        body["messages"].push_back({{"role", role}, {"content", text}});
    }

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        httplib::Client client(config_.endpoint);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        client.set_read_timeout(secs.count(), 0);
        client.set_write_timeout(secs.count(), 0);
        client.set_connection_timeout(secs.count(), 0);

        auto start = std::chrono::steady_clock::now();
        auto res = client.Post(config_.path, headers, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;  // transport failure: retry
        }
        if (res->status < 200 || res->status >= 300) {
            throw BackendError("backend HTTP status " + std::to_string(res->status) + ": " +
                               res->body);
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            BackendResponse out;
            out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
                out.completion_tokens = j["usage"].value("completion_tokens", 0);
            }
            out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed backend response: ") + e.what());
        }
    }
    throw BackendUnavailable("backend unreachable after " +
                             std::to_string(config_.max_retries) + " attempts: " + last_error);
}

}  // namespace flowcanvas
