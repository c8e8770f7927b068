#include "flowcanvas/action.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace flowcanvas {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct TagScan {
    std::vector<std::string> values;
    bool malformed = false;
    std::string detail;
};

// Collects every <tag>...</tag> occurrence. An opening tag without a closing
// counterpart marks the scan malformed.
TagScan scan_tag(const std::string& text, const std::string& tag) {
    TagScan scan;
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    std::size_t pos = 0;
    while ((pos = text.find(open, pos)) != std::string::npos) {
        std::size_t body = pos + open.size();
        std::size_t end = text.find(close, body);
        if (end == std::string::npos) {
            scan.malformed = true;
            scan.detail = "unclosed <" + tag + ">";
            return scan;
        }
        scan.values.push_back(text.substr(body, end - body));
        pos = end + close.size();
    }
    return scan;
}

TurnParseError error(TurnParseCode code, const std::string& message) {
    return {code, message};
}

std::optional<std::vector<OperatorKind>> parse_op_list(const std::string& text) {
    std::vector<OperatorKind> ops;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        auto kind = operator_from_name(trim(token));
        if (!kind) return std::nullopt;
        ops.push_back(*kind);
    }
    return ops;
}

}  // namespace

ParsedTurn parse_turn(const std::string& text) {
    auto think_scan = scan_tag(text, "think");
    if (think_scan.malformed) {
        return error(TurnParseCode::MalformedTag, think_scan.detail);
    }
    auto action_scan = scan_tag(text, "action");
    if (action_scan.malformed) {
        return error(TurnParseCode::MalformedTag, action_scan.detail);
    }
    if (action_scan.values.empty()) {
        return error(TurnParseCode::NoAction,
                     think_scan.values.empty() ? "no <action> tag"
                                               : "<think> without an <action> tag");
    }
    if (action_scan.values.size() > 1) {
        return error(TurnParseCode::MultipleActions,
                     "expected exactly one <action>, found " +
                         std::to_string(action_scan.values.size()));
    }

    auto param = [&](const char* tag) -> std::optional<std::string> {
        auto scan = scan_tag(text, tag);
        if (scan.malformed || scan.values.empty()) return std::nullopt;
        return trim(scan.values.front());
    };
    for (const char* tag : {"operator", "target", "prompt", "structure", "operators",
                            "condition", "true_branch", "false_branch", "body", "max_iter"}) {
        auto scan = scan_tag(text, tag);
        if (scan.malformed) return error(TurnParseCode::MalformedTag, scan.detail);
    }

    ActionEnvelope env;
    env.raw = text;
    if (!think_scan.values.empty()) env.think = trim(think_scan.values.front());

    std::string verb = lower(trim(action_scan.values.front()));
    std::string structure = lower(param("structure").value_or(""));
    if (verb == "add" && !structure.empty()) verb = structure;

    auto need = [&](const char* tag, const char* what) -> std::optional<std::string> {
        auto v = param(tag);
        if (!v || v->empty()) return std::nullopt;
        (void)what;
        return v;
    };

    if (verb == "finish") {
        env.action = FinishAction{};
        return env;
    }
    if (verb == "add") {
        auto op_text = need("operator", "operator");
        if (!op_text) return error(TurnParseCode::MalformedTag, "add needs <operator>");
        auto kind = operator_from_name(*op_text);
        if (!kind) {
            return error(TurnParseCode::MalformedTag, "unknown operator '" + *op_text + "'");
        }
        env.action = GraphEdit{AddEdit{*kind}};
        return env;
    }
    if (verb == "delete" || verb == "modify" || verb == "set_prompt") {
        auto target_text = need("target", "target");
        if (!target_text) {
            return error(TurnParseCode::MalformedTag, verb + " needs <target>");
        }
        auto target = NodeId::parse(*target_text);
        if (!target) {
            return error(TurnParseCode::MalformedTag, "bad node id '" + *target_text + "'");
        }
        if (verb == "delete") {
            env.action = GraphEdit{DeleteEdit{*target}};
            return env;
        }
        if (verb == "modify") {
            auto op_text = need("operator", "operator");
            if (!op_text) return error(TurnParseCode::MalformedTag, "modify needs <operator>");
            auto kind = operator_from_name(*op_text);
            if (!kind) {
                return error(TurnParseCode::MalformedTag, "unknown operator '" + *op_text + "'");
            }
            env.action = GraphEdit{ModifyEdit{*target, *kind}};
            return env;
        }
        auto prompt = scan_tag(text, "prompt");
        if (prompt.values.empty()) {
            return error(TurnParseCode::MalformedTag, "set_prompt needs <prompt>");
        }
        env.action = GraphEdit{SetPromptEdit{*target, trim(prompt.values.front())}};
        return env;
    }
    if (verb == "parallel") {
        auto ops_text = need("operators", "operators");
        if (!ops_text) return error(TurnParseCode::MalformedTag, "parallel needs <operators>");
        auto ops = parse_op_list(*ops_text);
        if (!ops) return error(TurnParseCode::MalformedTag, "bad operator list");
        if (ops->size() < 2) {
            return error(TurnParseCode::MalformedTag, "parallel needs at least 2 operators");
        }
        env.action = GraphEdit{AddParallelEdit{*ops}};
        return env;
    }
    if (verb == "conditional") {
        auto cond = need("condition", "condition");
        auto true_b = need("true_branch", "true_branch");
        auto false_b = need("false_branch", "false_branch");
        if (!cond || !true_b || !false_b) {
            return error(TurnParseCode::MalformedTag,
                         "conditional needs <condition>, <true_branch>, <false_branch>");
        }
        auto cond_kind = operator_from_name(*cond);
        auto true_kind = operator_from_name(*true_b);
        if (!cond_kind || !true_kind) {
            return error(TurnParseCode::MalformedTag, "unknown operator in conditional");
        }
        AddConditionalEdit edit{*cond_kind, *true_kind, std::nullopt};
        if (lower(*false_b) != "done") {
            auto false_kind = operator_from_name(*false_b);
            if (!false_kind) {
                return error(TurnParseCode::MalformedTag,
                             "false branch must be 'done' or an operator");
            }
            edit.false_branch = *false_kind;
        }
        env.action = GraphEdit{edit};
        return env;
    }
    if (verb == "loop") {
        auto body_text = need("body", "body");
        auto iter_text = need("max_iter", "max_iter");
        if (!body_text || !iter_text) {
            return error(TurnParseCode::MalformedTag, "loop needs <body> and <max_iter>");
        }
        auto body = parse_op_list(*body_text);
        if (!body || body->empty()) {
            return error(TurnParseCode::MalformedTag, "bad loop body");
        }
        int max_iter = 0;
        try {
            std::size_t used = 0;
            max_iter = std::stoi(*iter_text, &used);
            if (used != iter_text->size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            return error(TurnParseCode::MalformedTag, "max_iter must be an integer");
        }
        if (max_iter < 1) return error(TurnParseCode::MalformedTag, "max_iter must be >= 1");
        env.action = GraphEdit{AddLoopEdit{*body, max_iter}};
        return env;
    }
    return error(TurnParseCode::UnknownActionType, "unknown action type '" + verb + "'");
}

}  // namespace flowcanvas
