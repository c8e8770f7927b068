#include "flowcanvas/reward.hpp"

#include <algorithm>

#include "flowcanvas/metrics.hpp"

namespace flowcanvas {

const char* task_type_name(TaskType type) {
    switch (type) {
        case TaskType::QA_EM: return "qa_em";
        case TaskType::QA_F1: return "qa_f1";
        case TaskType::MathAccuracy: return "math";
        case TaskType::CodePass: return "code";
    }
    return "?";
}

std::optional<TaskType> task_type_from_name(const std::string& name) {
    if (name == "qa_em") return TaskType::QA_EM;
    if (name == "qa_f1") return TaskType::QA_F1;
    if (name == "math") return TaskType::MathAccuracy;
    if (name == "code") return TaskType::CodePass;
    return std::nullopt;
}

RewardProfile RewardProfile::table7() {
    RewardProfile p;
    p.name = "table7";
    p.w_checker_centi = 20;
    p.w_format_centi = 20;
    p.w_operator_centi = 20;
    p.w_control_centi = 40;
    p.min_operators = 5;
    p.require_checker = true;
    p.require_control = true;
    p.require_format_last = false;
    return p;
}

RewardProfile RewardProfile::appendix_c() {
    RewardProfile p;
    p.name = "appendixC";
    p.w_checker_centi = 25;
    p.w_format_centi = 25;
    p.w_operator_centi = 25;
    p.w_control_centi = 25;
    p.min_operators = 3;
    p.require_checker = true;
    p.require_control = false;
    p.require_format_last = false;
    return p;
}

std::optional<RewardProfile> RewardProfile::by_name(const std::string& name) {
    if (name == "table7") return table7();
    if (name == "appendixC") return appendix_c();
    return std::nullopt;
}

RewardBreakdown diversity_reward(const CheckReport& report, const RewardProfile& profile) {
    RewardBreakdown b;
    int centi = 0;
    if (report.has_checker) {
        b.r_checker = profile.w_checker();
        centi += profile.w_checker_centi;
    }
    if (report.has_format) {
        b.r_format = profile.w_format();
        centi += profile.w_format_centi;
    }
    if (report.has_min_operators) {
        b.r_operator = profile.w_operator();
        centi += profile.w_operator_centi;
    }
    if (report.has_control) {
        b.r_control = profile.w_control();
        centi += profile.w_control_centi;
    }
    int cap_centi = 100;
    int capped = std::min(cap_centi, centi);
    b.r_diversity = capped / 100.0;
    b.gate_open = capped == cap_centi;
    return b;
}

bool finish_allowed(const CheckReport& report, const RewardProfile& profile) {
    return failing_finish_checks(report, profile).empty();
}

std::vector<std::string> failing_finish_checks(const CheckReport& report,
                                               const RewardProfile& profile) {
    std::vector<std::string> failing;
    if (report.node_count < profile.min_operators) {
        failing.push_back("min_operators(" + std::to_string(report.node_count) + "/" +
                          std::to_string(profile.min_operators) + ")");
    }
    if (profile.require_checker && !report.has_checker) failing.push_back("checker");
    if (profile.require_control && !report.has_control) failing.push_back("control_structure");
    if (profile.require_format_last && !report.has_format) failing.push_back("format_last");
    return failing;
}

AnswerScore answer_reward(const std::string& prediction, const std::string& gold,
                          TaskType type, const SandboxConfig& sandbox, bool all_or_nothing) {
    if (gold.empty()) throw MissingGold("answer reward needs a gold answer or test suite");
    switch (type) {
        case TaskType::QA_EM:
            return {static_cast<double>(exact_match(prediction, gold)), false};
        case TaskType::QA_F1:
            return {f1_score(prediction, gold), false};
        case TaskType::MathAccuracy: {
            auto r = numeric_accuracy(prediction, gold);
            return {static_cast<double>(r.score), r.parse_failed};
        }
        case TaskType::CodePass: {
            auto tests = load_test_suite(gold);
            auto outcome = run_test_suite(prediction, tests, sandbox);
            if (outcome.total == 0) return {0.0, true};
            if (all_or_nothing) return {outcome.all_passed() ? 1.0 : 0.0, false};
            return {static_cast<double>(outcome.passed) / outcome.total, false};
        }
    }
    return {0.0, true};
}

double total_reward(RewardBreakdown& breakdown, const RewardProfile& profile) {
    breakdown.total = profile.base + breakdown.r_diversity +
                      (breakdown.gate_open ? breakdown.r_answer : 0.0);
    return breakdown.total;
}

}  // namespace flowcanvas
