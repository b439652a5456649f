#include <doctest.h>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/engine/activity.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/social/social.hpp"

using namespace usersim;

namespace {

AgentProfile person(std::uint32_t id, std::vector<std::string> interests) {
    AgentProfile p;
    p.id = AgentId{id};
    p.name = "P" + std::to_string(id);
    p.age = 30;
    p.interests = std::move(interests);
    p.features = {Feature::Chatter};
    return p;
}

}  // namespace

TEST_CASE("edges are symmetric, labelled and irreflexive") {
    SocialGraph g;
    CHECK(g.add_edge(AgentId{1}, AgentId{2}, "sibling"));
    CHECK_FALSE(g.add_edge(AgentId{2}, AgentId{1}));
    CHECK(g.has_edge(AgentId{2}, AgentId{1}));
    CHECK(g.label(AgentId{2}, AgentId{1}) == "sibling");
    CHECK_THROWS_AS(g.add_edge(AgentId{3}, AgentId{3}), SimError);
    g.add_edge(AgentId{1}, AgentId{5});
    g.add_node(AgentId{9});
    CHECK(g.friends(AgentId{1}) == std::vector<AgentId>{AgentId{2}, AgentId{5}});
    CHECK(g.degree(AgentId{9}) == 0);
    CHECK(g.edge_count() == 2);
    CHECK(g.nodes().size() == 4);
    CHECK(g.remove_edge(AgentId{5}, AgentId{1}));
    CHECK_FALSE(g.has_edge(AgentId{1}, AgentId{5}));
    CHECK(g.well_formed());
}

TEST_CASE("random graphs stay well formed under random edits") {
    SocialGraph g;
    auto rng = make_rng(4, {});
    for (int i = 0; i < 2000; ++i) {
        const AgentId a{static_cast<std::uint32_t>(uniform_index(rng, 30))};
        const AgentId b{static_cast<std::uint32_t>(uniform_index(rng, 30))};
        if (a == b) continue;
        if (uniform01(rng) < 0.7)
            g.add_edge(a, b);
        else
            g.remove_edge(a, b);
        REQUIRE(g.well_formed());
    }
    std::size_t degree_sum = 0;
    for (auto n : g.nodes()) degree_sum += g.degree(n);
    CHECK(degree_sum == 2 * g.edge_count());
}

TEST_CASE("graph csv and json round trips") {
    SocialGraph g;
    g.add_edge(AgentId{1}, AgentId{2});
    g.add_edge(AgentId{3}, AgentId{2}, "co, worker");
    const auto csv = graph_to_csv(g);
    CHECK(csv.rfind("agent_a,agent_b,label\n", 0) == 0);
    CHECK(csv.find("2,3,\"co, worker\"") != std::string::npos);
    CHECK(graph_from_csv(csv) == g);
    CHECK(SocialGraph::from_json(g.to_json()) == g);
    CHECK_THROWS_AS(graph_from_csv("x,y\n1,2\n"), SimError);
    CHECK_THROWS_AS(graph_from_csv("agent_a,agent_b\n1,one\n"), SimError);
}

TEST_CASE("interest dissimilarity is one minus jaccard") {
    CHECK(interest_dissimilarity({}, {}) == 0.0);
    CHECK(interest_dissimilarity({"A", "B"}, {"A", "B"}) == 0.0);
    CHECK(interest_dissimilarity({"A"}, {"B"}) == 1.0);
    // |{A}| / |{A,B,C}| = 1/3
    CHECK(interest_dissimilarity({"A", "B"}, {"A", "C"}) == doctest::Approx(2.0 / 3.0));
    CHECK(interest_dissimilarity({"A", "A", "B"}, {"B"}) == doctest::Approx(0.5));
}

TEST_CASE("heterophilous friends are the most dissimilar non-friends") {
    const std::vector<AgentProfile> ps = {person(1, {"Comedy"}), person(2, {"Horror"}), person(3, {"Comedy", "Drama"}),
                                          person(4, {"Horror"}), person(5, {"Comedy"})};
    SocialGraph g;
    for (const auto& p : ps) g.add_node(p.id);
    g.add_edge(AgentId{1}, AgentId{2});
    const auto added = add_heterophilous_friend(g, ps, AgentId{1}, 1);
    // 2 is already a friend; 4 is the next fully dissimilar agent
    CHECK(added == std::vector<AgentId>{AgentId{4}});
    CHECK(g.has_edge(AgentId{1}, AgentId{4}));
    const auto more = add_heterophilous_friend(g, ps, AgentId{1}, 2);
    CHECK(more == std::vector<AgentId>{AgentId{3}, AgentId{5}});
    CHECK(add_heterophilous_friend(g, ps, AgentId{1}, 1).empty());
}

TEST_CASE("generated graphs have a skewed degree distribution") {
    const auto cat = builtin_catalog();
    ActivityModel act;
    const auto ps = generate_population(200, cat, 3, act);
    const auto g = generate_graph(ps, 3);
    CHECK(g.well_formed());
    std::size_t max_deg = 0, total = 0;
    for (const auto& p : ps) {
        max_deg = std::max(max_deg, g.degree(p.id));
        total += g.degree(p.id);
    }
    const double mean = static_cast<double>(total) / ps.size();
    CHECK(max_deg > 3 * mean);
    CHECK(generate_graph(ps, 3) == g);
}

TEST_CASE("message json carries kind and recipients") {
    SocialMessage m{MessageKind::Broadcast, AgentId{1}, {AgentId{2}, AgentId{3}}, "hi <Heat>", {"Heat"}, 4};
    const auto j = to_json(m);
    CHECK(j["kind"] == "broadcast");
    CHECK(j["recipients"].size() == 2);
    CHECK(j["round"] == 4);
}
