#include "usersim/social/social.hpp"

#include <algorithm>
#include <set>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

using nlohmann::json;

bool SocialGraph::add_edge(AgentId a, AgentId b, const std::string& label) {
    if (a == b) throw SimError(ErrorCode::InvalidInput, "self-friendship for agent " + a.str());
    if (has_edge(a, b)) return false;
    adj_[a][b] = label;
    adj_[b][a] = label;
    return true;
}

bool SocialGraph::remove_edge(AgentId a, AgentId b) {
    if (!has_edge(a, b)) return false;
    adj_[a].erase(b);
    adj_[b].erase(a);
    return true;
}

bool SocialGraph::has_edge(AgentId a, AgentId b) const {
    auto it = adj_.find(a);
    return it != adj_.end() && it->second.count(b) > 0;
}

std::vector<AgentId> SocialGraph::friends(AgentId a) const {
    std::vector<AgentId> out;
    if (auto it = adj_.find(a); it != adj_.end())
        for (const auto& [b, _] : it->second) out.push_back(b);
    return out;
}

std::size_t SocialGraph::degree(AgentId a) const {
    auto it = adj_.find(a);
    return it == adj_.end() ? 0 : it->second.size();
}

std::string SocialGraph::label(AgentId a, AgentId b) const {
    auto it = adj_.find(a);
    if (it == adj_.end()) return {};
    auto e = it->second.find(b);
    return e == it->second.end() ? std::string() : e->second;
}

void SocialGraph::add_node(AgentId a) { adj_[a]; }

std::vector<AgentId> SocialGraph::nodes() const {
    std::vector<AgentId> out;
    for (const auto& [a, _] : adj_) out.push_back(a);
    return out;
}

std::size_t SocialGraph::edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, nb] : adj_) n += nb.size();
    return n / 2;
}

bool SocialGraph::well_formed() const {
    for (const auto& [a, nb] : adj_) {
        for (const auto& [b, label] : nb) {
            if (a == b) return false;
            auto back = adj_.find(b);
            if (back == adj_.end()) return false;
            auto e = back->second.find(a);
            if (e == back->second.end() || e->second != label) return false;
        }
    }
    return true;
}

json SocialGraph::to_json() const {
    json nodes = json::array();
    json edges = json::array();
    for (const auto& [a, nb] : adj_) {
        nodes.push_back(a.value);
        for (const auto& [b, label] : nb)
            if (a < b) edges.push_back({a.value, b.value, label});
    }
    return json{{"nodes", nodes}, {"edges", edges}};
}

SocialGraph SocialGraph::from_json(const json& j) {
    SocialGraph g;
    for (const auto& n : j.at("nodes")) g.add_node(AgentId{n.get<std::uint32_t>()});
    for (const auto& e : j.at("edges"))
        g.add_edge(AgentId{e.at(0).get<std::uint32_t>()}, AgentId{e.at(1).get<std::uint32_t>()}, e.at(2).get<std::string>());
    return g;
}

std::string graph_to_csv(const SocialGraph& g) {
    std::string out = "agent_a,agent_b,label\n";
    for (auto a : g.nodes())
        for (auto b : g.friends(a))
            if (a < b) out += std::to_string(a.value) + "," + std::to_string(b.value) + "," + text::csv_escape(g.label(a, b)) + "\n";
    return out;
}

SocialGraph graph_from_csv(std::string_view csv) {
    auto rows = text::parse_csv(csv);
    if (rows.empty() || rows[0].size() < 2 || text::trim(rows[0][0]) != "agent_a")
        throw SimError(ErrorCode::InvalidInput, "graph CSV needs header agent_a,agent_b,label");
    SocialGraph g;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && text::trim(row[0]).empty()) continue;
        if (row.size() < 2) throw SimError(ErrorCode::InvalidInput, "graph CSV row " + std::to_string(r) + " is short");
        try {
            AgentId a{static_cast<std::uint32_t>(std::stoul(row[0]))};
            AgentId b{static_cast<std::uint32_t>(std::stoul(row[1]))};
            g.add_edge(a, b, row.size() > 2 && !text::trim(row[2]).empty() ? text::trim(row[2]) : "friend");
        } catch (const std::logic_error&) {
            throw SimError(ErrorCode::InvalidInput, "graph CSV row " + std::to_string(r) + " has a bad id");
        }
    }
    return g;
}

json to_json(const SocialMessage& m) {
    std::vector<std::uint32_t> rec;
    for (auto r : m.recipients) rec.push_back(r.value);
    return json{{"kind", m.kind == MessageKind::Chat ? "chat" : "broadcast"},
                {"sender", m.sender.value},
                {"recipients", rec},
                {"content", m.content},
                {"mentioned_items", m.mentioned_items},
                {"round", m.round}};
}

double interest_dissimilarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const auto& x : sa) inter += sb.count(x);
    const std::size_t uni = sa.size() + sb.size() - inter;
    if (uni == 0) return 0.0;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<AgentId> add_heterophilous_friend(SocialGraph& graph, const std::vector<AgentProfile>& profiles,
                                              AgentId user, std::size_t m) {
    if (m < 1) throw SimError(ErrorCode::InvalidInput, "m must be >= 1");
    auto self = std::find_if(profiles.begin(), profiles.end(), [&](const AgentProfile& p) { return p.id == user; });
    if (self == profiles.end()) throw SimError(ErrorCode::InvalidInput, "unknown agent " + user.str());
    std::vector<std::pair<double, AgentId>> pool;
    for (const auto& p : profiles) {
        if (p.id == user || graph.has_edge(user, p.id)) continue;
        pool.emplace_back(-interest_dissimilarity(self->interests, p.interests), p.id);
    }
    std::sort(pool.begin(), pool.end());
    std::vector<AgentId> added;
    for (std::size_t i = 0; i < pool.size() && added.size() < m; ++i) {
        graph.add_edge(user, pool[i].second);
        added.push_back(pool[i].second);
    }
    return added;
}

}  // namespace usersim
