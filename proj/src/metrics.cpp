#include "flowcanvas/metrics.hpp"

#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace flowcanvas {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c); }

std::vector<std::string> whitespace_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

}  // namespace

std::string normalize_answer(const std::string& text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (unsigned char c : text) lowered.push_back(static_cast<char>(std::tolower(c)));

    std::string stripped;
    stripped.reserve(lowered.size());
    for (std::size_t i = 0; i < lowered.size(); ++i) {
        unsigned char c = lowered[i];
        if (is_word_char(c) || std::isspace(c)) {
            stripped.push_back(std::isspace(c) ? ' ' : static_cast<char>(c));
        } else if (c == '-' && i > 0 && i + 1 < lowered.size() &&
                   is_word_char(static_cast<unsigned char>(lowered[i - 1])) &&
                   is_word_char(static_cast<unsigned char>(lowered[i + 1]))) {
            stripped.push_back('-');  // hyphen inside a compound word survives
        }
        // Any other punctuation is removed outright.
    }

    std::string out;
    for (const auto& tok : whitespace_tokens(stripped)) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(const std::string& pred, const std::string& gold) {
    return normalize_answer(pred) == normalize_answer(gold) ? 1 : 0;
}

double f1_score(const std::string& pred, const std::string& gold) {
    auto p = whitespace_tokens(normalize_answer(pred));
    auto g = whitespace_tokens(normalize_answer(gold));
    if (p.empty() && g.empty()) return 1.0;
    if (p.empty() || g.empty()) return 0.0;

    std::map<std::string, int> counts;
    for (const auto& t : g) counts[t]++;
    int overlap = 0;
    for (const auto& t : p) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            overlap++;
            it->second--;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::optional<double> extract_last_number(const std::string& text) {
    // Drop thousands separators first so "1,234" parses as one number.
    std::string cleaned;
    cleaned.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == ',' && i > 0 && i + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            continue;
        }
        cleaned.push_back(text[i]);
    }

    std::optional<double> last;
    for (std::size_t i = 0; i < cleaned.size(); ++i) {
        unsigned char c = cleaned[i];
        bool starts_number = std::isdigit(c) ||
                             ((c == '-' || c == '+' || c == '.') && i + 1 < cleaned.size() &&
                              std::isdigit(static_cast<unsigned char>(cleaned[i + 1])));
        if (!starts_number) continue;
        try {
            std::size_t used = 0;
            double value = std::stod(cleaned.substr(i), &used);
            last = value;
            i += used - 1;
        } catch (const std::exception&) {
            // not a parseable number after all; keep scanning
        }
    }
    return last;
}

NumericResult numeric_accuracy(const std::string& pred, const std::string& gold,
                               double epsilon) {
    auto p = extract_last_number(pred);
    auto g = extract_last_number(gold);
    if (!p || !g) return {0, true};
    return {std::abs(*p - *g) < epsilon ? 1 : 0, false};
}

double pass_at_k(int n, int c, int k) {
    if (c < 0 || c > n || k < 1 || k > n) {
        throw std::domain_error("pass_at_k requires 0 <= c <= n and 1 <= k <= n");
    }
    if (n - c < k) return 1.0;
    // 1 - C(n-c, k)/C(n, k) as a telescoping product, stable for small n.
    double ratio = 1.0;
    for (int i = 0; i < k; ++i) {
        ratio *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
    }
    return 1.0 - ratio;
}

}  // namespace flowcanvas
