#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "usersim/agent/action.hpp"
#include "usersim/agent/profile.hpp"
#include "usersim/agent/prompt.hpp"
#include "usersim/core/catalog.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

enum class DecisionKind { TopAction, RecommenderAction, Feeling, Dialogue, Post, Interview };
const char* to_string(DecisionKind k);

struct DecisionRequest {
    AgentId agent;
    DecisionKind kind = DecisionKind::TopAction;
    std::string prompt;
    /// Structured view of the decision point (page items, partner, ...) for human players.
    nlohmann::json context = nlohmann::json::object();
    int attempt = 0;
};

/// Where decisions come from: the LLM port or a human session. An empty result
/// means no answer arrived (timeout) and the caller takes its safe default.
class DecisionChannel {
public:
    virtual ~DecisionChannel() = default;
    virtual std::optional<std::string> decide(const DecisionRequest& request) = 0;
};

class LlmChannel final : public DecisionChannel {
public:
    explicit LlmChannel(LlmPort& port, int max_tokens = 512) : port_(port), max_tokens_(max_tokens) {}
    std::optional<std::string> decide(const DecisionRequest& request) override {
        return port_.complete(request.prompt, max_tokens_);
    }

private:
    LlmPort& port_;
    int max_tokens_;
};

struct Decision {
    ParsedAction action;
    int attempts = 1;
    bool defaulted = false;  // the safe default was used
    std::vector<std::string> warnings;
};

/// One of EnterRecommender / EnterSocial / Nothing. One re-prompt, then Nothing.
Decision decide_top_action(DecisionChannel& channel, AgentId agent, const std::string& name,
                           const PromptBundle& base);

/// One of Buy / NextPage / Search / Leave. Buy must name an item on `page`
/// (resolved to its catalog title); otherwise one re-prompt, then Leave.
Decision decide_recommender_action(DecisionChannel& channel, AgentId agent, const std::string& name,
                                   const PromptBundle& base, const std::vector<const Item*>& page,
                                   const std::string& search_query);

/// First line of a first-person feeling; a neutral template on failure or timeout.
Decision generate_feeling(DecisionChannel& channel, AgentId agent, const std::string& name, const PromptBundle& base,
                          const Item& item);

/// Alternating turns, `a` first. Throws SimError(ChatFailed) when no turns parse after one re-prompt.
Decision generate_dialogue(DecisionChannel& channel, AgentId a_id, const std::string& a, const std::string& b,
                           const PromptBundle& base, std::size_t max_turns = 8);

/// One-line post. Mentions of titles outside `known_titles` lose their brackets.
Decision generate_post(DecisionChannel& channel, AgentId agent, const std::string& name, const PromptBundle& base,
                       const std::vector<std::string>& known_titles);

struct ItemMention {
    std::string text;
    const Item* item = nullptr;  // null for unknown mentions
};
std::vector<ItemMention> extract_item_mentions(std::string_view text, const ItemCatalog& catalog);

/// Removes <> around mentions whose titles are not in `allowed`. Returns the stripped titles.
std::vector<std::string> strip_unknown_mentions(std::string& text, const std::vector<std::string>& allowed);

}  // namespace usersim
