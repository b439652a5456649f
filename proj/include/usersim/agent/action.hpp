#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace usersim {

namespace act {
struct EnterRecommender {
    bool operator==(const EnterRecommender&) const = default;
};
struct EnterSocial {
    bool operator==(const EnterSocial&) const = default;
};
struct Nothing {
    bool operator==(const Nothing&) const = default;
};
struct Buy {
    std::string title;
    std::string description;
    bool operator==(const Buy&) const = default;
};
struct NextPage {
    bool operator==(const NextPage&) const = default;
};
struct Search {
    std::string query;
    bool operator==(const Search&) const = default;
};
struct Leave {
    bool operator==(const Leave&) const = default;
};
struct ChatTurn {
    std::string speaker;
    std::string text;
    bool operator==(const ChatTurn&) const = default;
};
struct ChatTurns {
    std::vector<ChatTurn> turns;
    bool operator==(const ChatTurns&) const = default;
};
struct Post {
    std::string text;
    bool operator==(const Post&) const = default;
};
struct Feeling {
    std::string text;
    bool operator==(const Feeling&) const = default;
};
}  // namespace act

using ActionKind = std::variant<act::EnterRecommender, act::EnterSocial, act::Nothing, act::Buy, act::NextPage,
                                act::Search, act::Leave, act::ChatTurns, act::Post, act::Feeling>;

struct ParsedAction {
    ActionKind kind;
    std::string raw;

    template <class T>
    bool is() const {
        return std::holds_alternative<T>(kind);
    }
    template <class T>
    const T& as() const {
        return std::get<T>(kind);
    }
    /// Equality ignores `raw`.
    bool same_action(const ParsedAction& other) const { return kind == other.kind; }
};

const char* kind_name(const ActionKind& kind);

enum class ParseErrorCode { Empty, NoTag, UnknownTag, UnexpectedTag, MissingPayload, NoTurns };
const char* to_string(ParseErrorCode c);

struct ParseError {
    ParseErrorCode code;
    std::string message;
};

/// Either a parsed action or a typed error; parsing never throws.
class ParseResult {
public:
    ParseResult(ParsedAction a) : value_(std::move(a)) {}
    ParseResult(ParseError e) : value_(std::move(e)) {}
    bool ok() const noexcept { return std::holds_alternative<ParsedAction>(value_); }
    explicit operator bool() const noexcept { return ok(); }
    const ParsedAction& action() const { return std::get<ParsedAction>(value_); }
    const ParseError& error() const { return std::get<ParseError>(value_); }

private:
    std::variant<ParsedAction, ParseError> value_;
};

/// [RECOMMENDER] / [SOCIAL] / [NOTHING]
ParseResult parse_top_action(std::string_view text);
/// [BUY] / [NEXT] / [SEARCH] / [LEAVE]
ParseResult parse_recommender_action(std::string_view text);
/// "[Speaker]: text" lines. Lines by other speakers are dropped, consecutive
/// lines by one speaker are joined, and leading turns by `b` are dropped so `a`
/// speaks first. At most `max_turns` turns are kept.
ParseResult parse_dialogue(std::string_view text, std::string_view a, std::string_view b, std::size_t max_turns = 8);
/// First non-empty line, optionally tagged [POST]::.
ParseResult parse_post(std::string_view text);
/// First non-empty line, optionally tagged [FEELING]::.
ParseResult parse_feeling(std::string_view text);
/// Context-free parse of any rendered form; used for round trips and fuzzing.
ParseResult parse_action(std::string_view text);

/// Line form of an action; parse_action(render_action(a)) equals a.
std::string render_action(const ActionKind& kind);

/// Contents of every <...> span in order of appearance.
std::vector<std::string> angle_mentions(std::string_view text);

}  // namespace usersim
