#include "usersim/agent/action.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "usersim/core/text.hpp"

namespace usersim {

const char* kind_name(const ActionKind& kind) {
    static constexpr std::array<const char*, 10> names = {"enter_recommender", "enter_social", "nothing", "buy",
                                                          "next_page",         "search",       "leave",   "chat",
                                                          "post",              "feeling"};
    return names[kind.index()];
}

const char* to_string(ParseErrorCode c) {
    switch (c) {
        case ParseErrorCode::Empty: return "empty";
        case ParseErrorCode::NoTag: return "no_tag";
        case ParseErrorCode::UnknownTag: return "unknown_tag";
        case ParseErrorCode::UnexpectedTag: return "unexpected_tag";
        case ParseErrorCode::MissingPayload: return "missing_payload";
        case ParseErrorCode::NoTurns: return "no_turns";
    }
    return "unknown";
}

std::vector<std::string> angle_mentions(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = s.find('<', pos)) != std::string_view::npos) {
        auto end = s.find('>', pos + 1);
        if (end == std::string_view::npos) break;
        auto inner = s.substr(pos + 1, end - pos - 1);
        if (inner.find('<') != std::string_view::npos) {
            pos = pos + 1 + inner.find('<');
            continue;
        }
        auto t = text::normalize_space(inner);
        if (!t.empty()) out.push_back(std::move(t));
        pos = end + 1;
    }
    return out;
}

namespace {

struct Tagged {
    std::string tag;      // upper-case
    std::string payload;  // rest of the line after "::", trimmed
};

/// Finds the earliest "[TAG]::" (or "[TAG]:") whose tag is one of `allowed`,
/// falling back to the first bracketed tag of any name.
std::optional<Tagged> find_tag(std::string_view s, const std::vector<std::string_view>& allowed, bool* unknown) {
    std::optional<Tagged> first_any;
    std::size_t pos = 0;
    while ((pos = s.find('[', pos)) != std::string_view::npos) {
        auto close = s.find(']', pos + 1);
        if (close == std::string_view::npos) break;
        auto tag = s.substr(pos + 1, close - pos - 1);
        std::size_t after = close + 1;
        while (after < s.size() && s[after] == ' ') ++after;
        if (after < s.size() && s[after] == ':' && !tag.empty() && tag.size() <= 16 &&
            std::all_of(tag.begin(), tag.end(), [](char c) { return std::isalpha(static_cast<unsigned char>(c)); })) {
            ++after;
            if (after < s.size() && s[after] == ':') ++after;
            auto eol = s.find('\n', after);
            Tagged t;
            for (char c : tag) t.tag += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            t.payload = text::trim(s.substr(after, eol == std::string_view::npos ? std::string_view::npos : eol - after));
            if (std::find(allowed.begin(), allowed.end(), t.tag) != allowed.end()) return t;
            if (!first_any) first_any = t;
        }
        pos = close + 1;
    }
    if (first_any && unknown) *unknown = true;
    return std::nullopt;
}

ParseError err(ParseErrorCode c, std::string msg) { return ParseError{c, std::move(msg)}; }

ParseResult tag_failure(std::string_view text, bool unknown) {
    if (text::trim(text).empty()) return err(ParseErrorCode::Empty, "empty response");
    if (unknown) return err(ParseErrorCode::UnexpectedTag, "tag not valid at this decision point");
    return err(ParseErrorCode::NoTag, "no [TAG]:: prefix found");
}

std::string strip_wrapping(std::string s) {
    s = text::trim(s);
    auto strip = [&](char open, char close) {
        if (s.size() >= 2 && s.front() == open && s.back() == close) {
            s = text::trim(s.substr(1, s.size() - 2));
            return true;
        }
        return false;
    };
    while (strip('<', '>') || strip('"', '"') || strip('\'', '\'')) {
    }
    return s;
}

ParseResult parse_buy(std::string_view payload, std::string_view raw) {
    std::string p = text::trim(payload);
    act::Buy buy;
    std::size_t rest = 0;
    if (!p.empty() && p.front() == '<') {
        auto close = p.find('>');
        if (close == std::string::npos) return err(ParseErrorCode::MissingPayload, "unterminated <title>");
        buy.title = text::normalize_space(std::string_view(p).substr(1, close - 1));
        rest = close + 1;
    } else {
        auto sep = std::min(p.find("||"), p.find(";;"));
        buy.title = strip_wrapping(p.substr(0, sep));
        rest = sep == std::string::npos ? p.size() : sep;
    }
    auto tail = text::trim(std::string_view(p).substr(rest));
    if (tail.rfind("||", 0) == 0 || tail.rfind(";;", 0) == 0) tail = text::trim(tail.substr(2));
    buy.description = tail;
    if (buy.title.empty()) return err(ParseErrorCode::MissingPayload, "[BUY] without a movie name");
    if (buy.title.find('>') != std::string::npos)
        return err(ParseErrorCode::MissingPayload, "[BUY] with a malformed <title>");
    return ParsedAction{buy, std::string(raw)};
}

}  // namespace

ParseResult parse_top_action(std::string_view text) {
    bool unknown = false;
    auto t = find_tag(text, {"RECOMMENDER", "SOCIAL", "NOTHING"}, &unknown);
    if (!t) return tag_failure(text, unknown);
    if (t->tag == "RECOMMENDER") return ParsedAction{act::EnterRecommender{}, std::string(text)};
    if (t->tag == "SOCIAL") return ParsedAction{act::EnterSocial{}, std::string(text)};
    return ParsedAction{act::Nothing{}, std::string(text)};
}

ParseResult parse_recommender_action(std::string_view text) {
    bool unknown = false;
    auto t = find_tag(text, {"BUY", "NEXT", "SEARCH", "LEAVE"}, &unknown);
    if (!t) return tag_failure(text, unknown);
    if (t->tag == "BUY") return parse_buy(t->payload, text);
    if (t->tag == "NEXT") return ParsedAction{act::NextPage{}, std::string(text)};
    if (t->tag == "LEAVE") return ParsedAction{act::Leave{}, std::string(text)};
    auto q = strip_wrapping(t->payload);
    if (q.empty()) return err(ParseErrorCode::MissingPayload, "[SEARCH] without a query");
    return ParsedAction{act::Search{q}, std::string(text)};
}

namespace {

std::vector<act::ChatTurn> raw_turns(std::string_view text) {
    std::vector<act::ChatTurn> turns;
    for (const auto& line : text::lines(text)) {
        auto t = text::trim(line);
        if (t.size() < 4 || t.front() != '[') {
            // continuation of the previous turn
            if (!turns.empty() && !t.empty() && t != "......") turns.back().text += " " + t;
            continue;
        }
        auto close = t.find("]:");
        if (close == std::string::npos || close == 1) continue;
        auto speaker = text::normalize_space(std::string_view(t).substr(1, close - 1));
        auto body = text::trim(std::string_view(t).substr(close + 2));
        while (!body.empty() && body.front() == ':') body = text::trim(body.substr(1));
        turns.push_back({speaker, body});
    }
    for (auto& t : turns) {
        t.text = text::trim(t.text);
        while (!t.text.empty() && t.text.front() == ':') t.text = text::trim(t.text.substr(1));
    }
    return turns;
}

}  // namespace

ParseResult parse_dialogue(std::string_view text, std::string_view a, std::string_view b, std::size_t max_turns) {
    if (text::trim(text).empty()) return err(ParseErrorCode::Empty, "empty dialogue");
    const auto ka = text::title_key(a);
    const auto kb = text::title_key(b);
    act::ChatTurns out;
    for (auto& t : raw_turns(text)) {
        const auto k = text::title_key(t.speaker);
        if (k != ka && k != kb) continue;
        if (t.text.empty()) continue;
        t.speaker = std::string(k == ka ? a : b);
        if (out.turns.empty() && k == kb) continue;
        if (!out.turns.empty() && out.turns.back().speaker == t.speaker) {
            out.turns.back().text += " " + t.text;
            continue;
        }
        if (out.turns.size() == max_turns) break;
        out.turns.push_back(std::move(t));
    }
    if (out.turns.empty()) return err(ParseErrorCode::NoTurns, "no turns by the two participants");
    return ParsedAction{out, std::string(text)};
}

namespace {

ParseResult parse_line_text(std::string_view text, std::string_view tag, bool post) {
    bool unknown = false;
    std::string line;
    if (auto t = find_tag(text, {tag}, &unknown)) {
        line = t->payload;
    } else {
        line = text::first_nonempty_line(text);
        for (std::string_view prefix : {"Post:", "Output:", "Feeling:"})
            if (text::istarts_with(line, prefix)) line = text::trim(line.substr(prefix.size()));
    }
    line = text::trim(line);
    if (line.empty()) return err(ParseErrorCode::Empty, "empty text");
    if (post) return ParsedAction{act::Post{line}, std::string(text)};
    return ParsedAction{act::Feeling{line}, std::string(text)};
}

}  // namespace

ParseResult parse_post(std::string_view text) { return parse_line_text(text, "POST", true); }
ParseResult parse_feeling(std::string_view text) { return parse_line_text(text, "FEELING", false); }

ParseResult parse_action(std::string_view text) {
    if (text::trim(text).empty()) return err(ParseErrorCode::Empty, "empty response");
    static const std::vector<std::string_view> all = {"RECOMMENDER", "SOCIAL", "NOTHING", "BUY",  "NEXT",
                                                      "SEARCH",      "LEAVE",  "POST",    "FEELING"};
    bool unknown = false;
    if (auto t = find_tag(text, all, &unknown)) {
        if (t->tag == "RECOMMENDER" || t->tag == "SOCIAL" || t->tag == "NOTHING") return parse_top_action(text);
        if (t->tag == "POST") return parse_post(text);
        if (t->tag == "FEELING") return parse_feeling(text);
        return parse_recommender_action(text);
    }
    // "[WORD]:: ..." is an action tag, not a chat line
    const auto first = text::first_nonempty_line(text);
    if (auto close = first.find("]::"); first.front() == '[' && close != std::string::npos && close > 1 &&
                                        std::all_of(first.begin() + 1, first.begin() + close, [](char c) {
                                            return std::isupper(static_cast<unsigned char>(c));
                                        }))
        return err(ParseErrorCode::UnknownTag, "unrecognized tag [" + first.substr(1, close - 1) + "]");
    auto turns = raw_turns(text);
    if (!turns.empty()) {
        // participants in order of appearance; a chat has exactly two
        std::vector<std::string> speakers;
        for (const auto& t : turns)
            if (std::find(speakers.begin(), speakers.end(), t.speaker) == speakers.end()) speakers.push_back(t.speaker);
        if (speakers.size() == 1) speakers.push_back("");
        return parse_dialogue(text, speakers[0], speakers[1], turns.size());
    }
    if (unknown) return err(ParseErrorCode::UnknownTag, "unrecognized tag");
    return err(ParseErrorCode::NoTag, "no recognizable action form");
}

std::string render_action(const ActionKind& kind) {
    struct Visitor {
        std::string operator()(const act::EnterRecommender&) const { return "[RECOMMENDER]:: enters the Recommender System."; }
        std::string operator()(const act::EnterSocial&) const { return "[SOCIAL]:: enters the Social Media."; }
        std::string operator()(const act::Nothing&) const { return "[NOTHING]:: does nothing."; }
        std::string operator()(const act::Buy& b) const {
            return "[BUY]:: <" + b.title + ">" + (b.description.empty() ? "" : "||" + b.description);
        }
        std::string operator()(const act::NextPage&) const { return "[NEXT]:: views the next page."; }
        std::string operator()(const act::Search& s) const { return "[SEARCH]:: " + s.query; }
        std::string operator()(const act::Leave&) const { return "[LEAVE]:: leaves the recommender system."; }
        std::string operator()(const act::ChatTurns& c) const {
            std::string out;
            for (const auto& t : c.turns) out += "[" + t.speaker + "]: " + t.text + "\n";
            return out;
        }
        std::string operator()(const act::Post& p) const { return "[POST]:: " + p.text; }
        std::string operator()(const act::Feeling& f) const { return "[FEELING]:: " + f.text; }
    };
    return std::visit(Visitor{}, kind);
}

}  // namespace usersim
