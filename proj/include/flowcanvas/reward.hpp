#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowcanvas/graph.hpp"
#include "flowcanvas/sandbox.hpp"

namespace flowcanvas {

enum class TaskType { QA_EM, QA_F1, MathAccuracy, CodePass };

const char* task_type_name(TaskType type);
std::optional<TaskType> task_type_from_name(const std::string& name);

/// Structural-reward profile plus the finish-gate flags that ride on it.
/// Weights are exact decimals stored internally as integer hundredths so the
/// gate test (diversity == 1.0) is exact integer arithmetic, never a float
/// tolerance.
struct RewardProfile {
    std::string name;
    int w_checker_centi = 25;
    int w_format_centi = 25;
    int w_operator_centi = 25;
    int w_control_centi = 25;
    int min_operators = 3;
    bool require_checker = true;
    bool require_control = false;
    bool require_format_last = false;
    double base = -1.0;
    double cap = 1.0;

    double w_checker() const { return w_checker_centi / 100.0; }
    double w_format() const { return w_format_centi / 100.0; }
    double w_operator() const { return w_operator_centi / 100.0; }
    double w_control() const { return w_control_centi / 100.0; }

    /// Training defaults: 0.2/0.2/0.2/0.4, minimum 5 operators, checker and
    /// control structure required to finish.
    static RewardProfile table7();
    /// Equal 0.25 weights, minimum 3 operators, checker required to finish.
    static RewardProfile appendix_c();
    static std::optional<RewardProfile> by_name(const std::string& name);
};

struct RewardBreakdown {
    double r_checker = 0.0;
    double r_format = 0.0;
    double r_operator = 0.0;
    double r_control = 0.0;
    double r_diversity = 0.0;
    bool gate_open = false;
    double r_answer = 0.0;
    double total = 0.0;
};

/// Fills the four structural components and the capped diversity sum from a
/// check report. The gate is open iff the exact weight sum reaches the cap.
RewardBreakdown diversity_reward(const CheckReport& report, const RewardProfile& profile);

/// True iff the graph may finish under the profile's gate flags.
bool finish_allowed(const CheckReport& report, const RewardProfile& profile);
std::vector<std::string> failing_finish_checks(const CheckReport& report,
                                               const RewardProfile& profile);

class MissingGold : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct AnswerScore {
    double value = 0.0;
    bool parse_flag = false;
};

/// Dispatches to the task metric. For CodePass, `gold` is a test-suite file
/// path (JSONL of {stdin, expected_stdout}); `prediction` is the program
/// text. all_or_nothing=true scores 1 only when every test passes, otherwise
/// the passed fraction is returned.
AnswerScore answer_reward(const std::string& prediction, const std::string& gold,
                          TaskType type, const SandboxConfig& sandbox,
                          bool all_or_nothing = true);

/// base + r_diversity + [gate] * r_answer, with the gate decided exactly.
double total_reward(RewardBreakdown& breakdown, const RewardProfile& profile);

}  // namespace flowcanvas
