#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowcanvas {

struct BackendRequest {
    std::vector<std::pair<std::string, std::string>> messages;  // (role, text)
    double temperature = 0.0;
    int max_output = 2048;
    /// Operator kind issuing the call; the scripted mock keys on it.
    std::string op_kind;
};

struct BackendResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::chrono::milliseconds latency{0};
};

class BackendError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BackendUnavailable : public BackendError {
  public:
    using BackendError::BackendError;
};

class MockScriptExhausted : public BackendError {
  public:
    using BackendError::BackendError;
};

class Backend {
  public:
    virtual ~Backend() = default;
    virtual BackendResponse complete(const BackendRequest& request) = 0;
    /// True when calls must be issued in a deterministic serial order
    /// (ordinal-keyed mocks); false for backends safe to hit concurrently.
    virtual bool serial_only() const { return false; }
};

/// Deterministic scripted backend. Responses are keyed by (operator kind,
/// 1-based call ordinal per kind) so fixtures survive prompt-template edits.
/// Fails loudly when the script has no entry for a call.
class MockBackend : public Backend {
  public:
    MockBackend() = default;

    /// Loads a JSONL fixture of {"kind": ..., "ordinal": ..., "response": ...}.
    /// Entries carrying a "task_id" field are kept only when it equals
    /// `task_filter`.
    static std::unique_ptr<MockBackend> from_file(const std::string& path,
                                                  const std::string& task_filter = "");

    void add_response(const std::string& kind, int ordinal, const std::string& response);

    BackendResponse complete(const BackendRequest& request) override;
    bool serial_only() const override { return true; }

  private:
    std::mutex mutex_;
    std::map<std::pair<std::string, int>, std::string> script_;
    std::map<std::string, int> counters_;
};

struct HttpBackendConfig {
    std::string endpoint;                      // e.g. http://host:port
    std::string path = "/v1/chat/completions";
    std::string model = "default";
    std::string api_key_env = "FLOWCANVAS_API_KEY";
    std::chrono::milliseconds timeout{600000};
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{250};
};

/// Chat-completion client over HTTP. Retries transport failures with
/// exponential backoff; HTTP error statuses and parse failures are not
/// retried.
class HttpBackend : public Backend {
  public:
    explicit HttpBackend(HttpBackendConfig config);
    BackendResponse complete(const BackendRequest& request) override;

  private:
    HttpBackendConfig config_;
};

}  // namespace flowcanvas
