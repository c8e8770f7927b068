#pragma once

#include <optional>
#include <string>

namespace flowcanvas {

/// Answer normalization for QA metrics: lowercase, strip punctuation except
/// intra-word hyphens, drop standalone articles (a/an/the), collapse
/// whitespace, trim. Idempotent.
std::string normalize_answer(const std::string& text);

/// 1 iff the normalized forms are equal.
int exact_match(const std::string& pred, const std::string& gold);

/// Token-level multiset-overlap F1 over normalized whitespace tokens.
/// Both empty -> 1.0; exactly one empty -> 0.0.
double f1_score(const std::string& pred, const std::string& gold);

/// Extracts the last number in a string (competition convention). Commas
/// between digits are ignored.
std::optional<double> extract_last_number(const std::string& text);

struct NumericResult {
    int score = 0;
    bool parse_failed = false;
};

/// 1 iff |pred - gold| < epsilon after numeric extraction; a non-numeric
/// input scores 0 with the parse_failed flag set.
NumericResult numeric_accuracy(const std::string& pred, const std::string& gold,
                               double epsilon = 1e-6);

/// 1 - C(n-c, k) / C(n, k), with C(a, b) = 0 when a < b.
double pass_at_k(int n, int c, int k);

}  // namespace flowcanvas
