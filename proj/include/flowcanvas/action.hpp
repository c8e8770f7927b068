#pragma once

#include <optional>
#include <string>
#include <variant>

#include "flowcanvas/graph.hpp"

namespace flowcanvas {

struct FinishAction {
    friend bool operator==(const FinishAction&, const FinishAction&) = default;
};

using TurnAction = std::variant<GraphEdit, FinishAction>;

/// One director turn: optional reflection plus exactly one action.
struct ActionEnvelope {
    std::optional<std::string> think;
    TurnAction action;
    std::string raw;
};

enum class TurnParseCode {
    NoAction,
    MultipleActions,
    MalformedTag,
    UnknownActionType,
};

struct TurnParseError {
    TurnParseCode code;
    std::string message;
};

using ParsedTurn = std::variant<ActionEnvelope, TurnParseError>;

/// Total over arbitrary byte strings: returns an envelope or a typed error,
/// never throws. Recognizes the first <think> block and exactly one <action>
/// tag plus its parameter tags (<operator>, <target>, <prompt>, <structure>,
/// <operators>, <condition>, <true_branch>, <false_branch>, <body>,
/// <max_iter>); trailing junk is ignored.
ParsedTurn parse_turn(const std::string& text);

inline bool is_ok(const ParsedTurn& t) { return std::holds_alternative<ActionEnvelope>(t); }
inline const ActionEnvelope& envelope(const ParsedTurn& t) {
    return std::get<ActionEnvelope>(t);
}
inline const TurnParseError& parse_error(const ParsedTurn& t) {
    return std::get<TurnParseError>(t);
}

}  // namespace flowcanvas
