#include "usersim/agent/agent.hpp"

#include <algorithm>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/llm/prompt_kind.hpp"

namespace usersim {

using nlohmann::json;

const char* to_string(DecisionKind k) {
    switch (k) {
        case DecisionKind::TopAction: return "top_action";
        case DecisionKind::RecommenderAction: return "recommender_action";
        case DecisionKind::Feeling: return "feeling";
        case DecisionKind::Dialogue: return "dialogue";
        case DecisionKind::Post: return "post";
        case DecisionKind::Interview: return "interview";
    }
    return "unknown";
}

namespace {

std::string retry_prompt(const std::string& prompt, const std::string& problem) {
    return prompt + "\n\n" + std::string(markers::kRetry) + " (" + problem +
           ") Respond again using exactly one of the formats above.";
}

json page_json(const std::vector<const Item*>& page) {
    json arr = json::array();
    for (const auto* it : page) arr.push_back({{"id", it->id}, {"title", it->title}, {"description", it->description}});
    return arr;
}

/// Runs up to two attempts; `accept` returns an error message or empty on success.
template <class Parse>
Decision run_decision(DecisionChannel& channel, DecisionRequest request, Parse parse, ParsedAction fallback) {
    Decision d;
    const std::string base_prompt = request.prompt;
    for (int attempt = 0; attempt < 2; ++attempt) {
        request.attempt = attempt;
        d.attempts = attempt + 1;
        auto answer = channel.decide(request);
        if (!answer) {
            d.warnings.push_back(std::string(to_string(request.kind)) + ": no answer before timeout");
            break;
        }
        std::string problem;
        if (auto parsed = parse(*answer, problem)) {
            d.action = std::move(*parsed);
            return d;
        }
        d.warnings.push_back(std::string(to_string(request.kind)) + ": " + problem);
        request.prompt = retry_prompt(base_prompt, problem);
    }
    d.action = std::move(fallback);
    d.defaulted = true;
    return d;
}

}  // namespace

Decision decide_top_action(DecisionChannel& channel, AgentId agent, const std::string& name,
                           const PromptBundle& base) {
    PromptBundle b = base;
    b.instruction = take_action_instruction(name);
    DecisionRequest req{agent, DecisionKind::TopAction, build_prompt(b), json::object(), 0};
    return run_decision(
        channel, req,
        [](const std::string& answer, std::string& problem) -> std::optional<ParsedAction> {
            auto r = parse_top_action(answer);
            if (r) return r.action();
            problem = r.error().message;
            return std::nullopt;
        },
        ParsedAction{act::Nothing{}, ""});
}

Decision decide_recommender_action(DecisionChannel& channel, AgentId agent, const std::string& name,
                                   const PromptBundle& base, const std::vector<const Item*>& page,
                                   const std::string& search_query) {
    PromptBundle b = base;
    b.instruction = recommender_instruction(name, page, search_query);
    DecisionRequest req{agent, DecisionKind::RecommenderAction, build_prompt(b),
                        {{"page", page_json(page)}, {"search_query", search_query}}, 0};
    return run_decision(
        channel, req,
        [&](const std::string& answer, std::string& problem) -> std::optional<ParsedAction> {
            auto r = parse_recommender_action(answer);
            if (!r) {
                problem = r.error().message;
                return std::nullopt;
            }
            ParsedAction a = r.action();
            if (a.is<act::Buy>()) {
                const auto key = text::title_key(a.as<act::Buy>().title);
                auto it = std::find_if(page.begin(), page.end(),
                                       [&](const Item* i) { return text::title_key(i->title) == key; });
                if (it == page.end()) {
                    problem = "<" + a.as<act::Buy>().title + "> is not on the current page";
                    return std::nullopt;
                }
                a.kind = act::Buy{(*it)->title, (*it)->description};
            } else if (a.is<act::NextPage>() && page.empty()) {
                // nothing to page through; treat as leaving
                a.kind = act::Leave{};
            }
            return a;
        },
        ParsedAction{act::Leave{}, ""});
}

Decision generate_feeling(DecisionChannel& channel, AgentId agent, const std::string& name, const PromptBundle& base,
                          const Item& item) {
    PromptBundle b = base;
    b.instruction = feeling_instruction(name, item);
    DecisionRequest req{agent, DecisionKind::Feeling, build_prompt(b),
                        {{"item", {{"id", item.id}, {"title", item.title}}}}, 0};
    return run_decision(
        channel, req,
        [](const std::string& answer, std::string& problem) -> std::optional<ParsedAction> {
            auto r = parse_feeling(answer);
            if (r) return r.action();
            problem = r.error().message;
            return std::nullopt;
        },
        ParsedAction{act::Feeling{"I watched <" + item.title + "> and thought it was okay."}, ""});
}

Decision generate_dialogue(DecisionChannel& channel, AgentId a_id, const std::string& a, const std::string& b,
                           const PromptBundle& base, std::size_t max_turns) {
    PromptBundle bundle = base;
    bundle.instruction = dialogue_instruction(a, b);
    DecisionRequest req{a_id, DecisionKind::Dialogue, build_prompt(bundle), {{"partner", b}}, 0};
    auto d = run_decision(
        channel, req,
        [&](const std::string& answer, std::string& problem) -> std::optional<ParsedAction> {
            auto r = parse_dialogue(answer, a, b, max_turns);
            if (r) return r.action();
            problem = r.error().message;
            return std::nullopt;
        },
        ParsedAction{act::ChatTurns{}, ""});
    if (d.defaulted) throw SimError(ErrorCode::ChatFailed, a + " and " + b + ": no parseable dialogue");
    return d;
}

std::vector<std::string> strip_unknown_mentions(std::string& s, const std::vector<std::string>& allowed) {
    std::vector<std::string> stripped;
    std::string out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        auto open = s.find('<', pos);
        if (open == std::string::npos) break;
        auto close = s.find('>', open + 1);
        if (close == std::string::npos) break;
        const auto inner = s.substr(open + 1, close - open - 1);
        const auto key = text::title_key(inner);
        const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                    [&](const std::string& t) { return text::title_key(t) == key; });
        out += s.substr(pos, open - pos);
        if (ok) {
            out += s.substr(open, close - open + 1);
        } else {
            out += inner;
            stripped.push_back(text::normalize_space(inner));
        }
        pos = close + 1;
    }
    out += s.substr(std::min(pos, s.size()));
    s = std::move(out);
    return stripped;
}

Decision generate_post(DecisionChannel& channel, AgentId agent, const std::string& name, const PromptBundle& base,
                       const std::vector<std::string>& known_titles) {
    PromptBundle b = base;
    b.instruction = post_instruction(name);
    DecisionRequest req{agent, DecisionKind::Post, build_prompt(b), {{"known_titles", known_titles}}, 0};
    auto d = run_decision(
        channel, req,
        [](const std::string& answer, std::string& problem) -> std::optional<ParsedAction> {
            auto r = parse_post(answer);
            if (r) return r.action();
            problem = r.error().message;
            return std::nullopt;
        },
        ParsedAction{act::Post{"Looking for some good movie recommendations!"}, ""});
    auto post = d.action.as<act::Post>();
    for (const auto& s : strip_unknown_mentions(post.text, known_titles))
        d.warnings.push_back("post: removed mention of unknown movie <" + s + ">");
    d.action.kind = post;
    return d;
}

std::vector<ItemMention> extract_item_mentions(std::string_view s, const ItemCatalog& catalog) {
    std::vector<ItemMention> out;
    for (auto& m : angle_mentions(s)) {
        const Item* item = catalog.find_by_title(m);
        out.push_back({std::move(m), item});
    }
    return out;
}

}  // namespace usersim
