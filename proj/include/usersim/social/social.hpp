#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "usersim/agent/profile.hpp"
#include "usersim/core/ids.hpp"

namespace usersim {

/// Undirected, irreflexive friendship graph with a label per edge.
class SocialGraph {
public:
    /// Adds a symmetric edge. Returns false when it already existed. Self-loops throw.
    bool add_edge(AgentId a, AgentId b, const std::string& label = "friend");
    bool remove_edge(AgentId a, AgentId b);
    bool has_edge(AgentId a, AgentId b) const;
    /// Friends in ascending id order.
    std::vector<AgentId> friends(AgentId a) const;
    std::size_t degree(AgentId a) const;
    std::string label(AgentId a, AgentId b) const;
    void add_node(AgentId a);
    std::vector<AgentId> nodes() const;
    std::size_t edge_count() const;

    /// Checks symmetry and irreflexivity.
    bool well_formed() const;

    nlohmann::json to_json() const;
    static SocialGraph from_json(const nlohmann::json& j);
    bool operator==(const SocialGraph&) const = default;

private:
    std::map<AgentId, std::map<AgentId, std::string>> adj_;
};

/// Header agent_a,agent_b,label; each edge listed once with agent_a < agent_b.
std::string graph_to_csv(const SocialGraph& g);
SocialGraph graph_from_csv(std::string_view csv);

enum class MessageKind { Chat, Broadcast };

struct SocialMessage {
    MessageKind kind = MessageKind::Chat;
    AgentId sender;
    std::vector<AgentId> recipients;
    std::string content;
    std::vector<std::string> mentioned_items;
    std::uint64_t round = 0;
};

nlohmann::json to_json(const SocialMessage& m);

/// 1 - |A ∩ B| / |A ∪ B| over interest sets; 0 when both are empty.
double interest_dissimilarity(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Befriends the `m` non-friends whose interests differ most from `user`'s
/// (ties by lower id). Returns the new friends.
std::vector<AgentId> add_heterophilous_friend(SocialGraph& graph, const std::vector<AgentProfile>& profiles,
                                              AgentId user, std::size_t m);

}  // namespace usersim
