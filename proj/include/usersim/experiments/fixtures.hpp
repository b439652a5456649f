#pragma once

#include <memory>
#include <vector>

#include "usersim/agent/profile.hpp"
#include "usersim/core/catalog.hpp"
#include "usersim/engine/engine.hpp"
#include "usersim/social/social.hpp"

namespace usersim {

/// 80 well-known movies, 8 in each of 10 genres. Ids interleave the genres so
/// the first page of an untrained ranking already spans several of them.
ItemCatalog builtin_catalog();

struct PopulationOptions {
    std::size_t interests_min = 1;
    std::size_t interests_max = 2;
    double p_watcher = 0.75;
    double p_explorer = 0.3;
    double p_critic = 0.2;
    double p_chatter = 0.3;
    double p_poster = 0.3;
};

/// Seeded profiles with ids 1..n; activity levels come from `activity`.
std::vector<AgentProfile> generate_population(std::size_t n, const ItemCatalog& catalog, std::uint64_t seed,
                                              const ActivityModel& activity, const PopulationOptions& options = {});

struct GraphOptions {
    std::size_t links_min = 1;      // edges each newcomer adds
    std::size_t links_max = 3;
    double homophily = 3.0;         // weight multiplier for a shared interest
    std::size_t isolated = 0;       // this many agents (highest ids) get no friends
};

/// Grows the graph in id order with degree- and interest-weighted attachment,
/// which gives a skewed degree distribution.
SocialGraph generate_graph(const std::vector<AgentProfile>& profiles, std::uint64_t seed,
                           const GraphOptions& options = {});

/// Catalog, profiles and graph from the config's paths, generated when a path is empty.
std::unique_ptr<Engine> build_engine(const SimulationConfig& config, std::shared_ptr<LlmPort> port = nullptr,
                                     const PopulationOptions& population = {}, const GraphOptions& graph = {});

}  // namespace usersim
