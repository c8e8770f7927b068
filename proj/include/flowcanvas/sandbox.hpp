#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace flowcanvas {

enum class SandboxStatus { Ok, NonZero, Timeout, Denied };

struct SandboxConfig {
    std::chrono::milliseconds limit{30000};
    std::string interpreter = "python3";
    /// Attempt to drop network access via a fresh user+net namespace. With
    /// best_effort_isolation the run proceeds (flagged) when the platform
    /// refuses namespaces; otherwise the result is Denied.
    bool best_effort_isolation = true;
};

struct SandboxResult {
    std::string stdout_text;
    std::string stderr_text;
    SandboxStatus status = SandboxStatus::Denied;
    std::chrono::milliseconds wall_time{0};
    bool network_isolated = false;
};

/// Runs `code` under the configured interpreter in a throwaway working
/// directory, feeding `stdin_text` and killing the process group at the
/// wall-clock limit.
SandboxResult sandbox_execute(const std::string& code, const std::string& stdin_text,
                              const SandboxConfig& config);

struct TestCase {
    std::string stdin_text;
    std::string expected_stdout;
};

struct TestOutcome {
    int passed = 0;
    int total = 0;
    std::string first_failure;  // empty when everything passed
    bool all_passed() const { return total > 0 && passed == total; }
};

/// Outputs are compared after trailing-whitespace strip.
TestOutcome run_test_suite(const std::string& code, const std::vector<TestCase>& tests,
                           const SandboxConfig& config);

/// Loads a JSONL test-suite file of {"stdin": ..., "expected_stdout": ...}.
std::vector<TestCase> load_test_suite(const std::string& path);

}  // namespace flowcanvas
