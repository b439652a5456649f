#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "usersim/core/ids.hpp"
#include "usersim/engine/activity.hpp"
#include "usersim/memory/memory.hpp"
#include "usersim/recsys/recommender.hpp"

namespace usersim {

/// A scheduled strategy. "rec" randomizes `n` items of every page shown to the
/// target agents at rounds start_round, start_round + period, ...; "soc" befriends
/// `n` dissimilar agents once at start_round.
struct InterventionSpec {
    std::string strategy;
    std::uint64_t start_round = 0;
    std::uint64_t period = 1;
    std::size_t n = 1;
    std::vector<AgentId> agents;  // empty means every agent

    void validate() const;
    bool operator==(const InterventionSpec&) const = default;
};

struct LlmConfig {
    std::string backend = "mock";  // "mock" or "remote"
    std::vector<std::string> keys;
    std::size_t max_concurrency_per_key = 1;
    std::size_t embed_dim = 256;
    std::string base_url = "https://api.openai.com";
    std::string model = "gpt-3.5-turbo";
    std::string embedding_model = "text-embedding-ada-002";
    double temperature = 0.7;
    int max_tokens = 512;
    int timeout_ms = 60000;

    bool operator==(const LlmConfig&) const = default;
};

struct SimulationConfig {
    std::uint64_t seed = 42;
    bool seed_given = true;
    bool determinism = true;
    std::size_t num_agents = 20;
    std::uint64_t rounds = 10;
    std::string catalog_path;   // empty selects the built-in catalog
    std::string profiles_path;  // JSONL; empty generates a population
    std::string graph_path;     // edge-list CSV; empty generates a graph
    std::string start_time = "2023-09-12 08:00";
    int round_minutes = 60;
    std::size_t max_dialogue_turns = 8;
    int role_play_timeout_ms = 30000;

    MemoryConfig memory;
    RecsysConfig recsys;
    ActivityModel activity;
    LlmConfig llm;
    std::vector<InterventionSpec> interventions;

    /// Throws SimError(ConfigInvalid) for out-of-range values or a missing seed in determinism mode.
    void validate() const;
    bool operator==(const SimulationConfig&) const = default;
};

/// Parses TOML with sections [sim], [llm], [memory], [recsys], [activity] and
/// [[interventions]]. Relative paths resolve against `base_dir`. API keys may
/// also come from the environment variable named by llm.keys_env.
SimulationConfig parse_config_toml(std::string_view toml_text, const std::string& base_dir = ".");
SimulationConfig load_config_file(const std::string& path);

void to_json(nlohmann::json& j, const InterventionSpec& s);
void from_json(const nlohmann::json& j, InterventionSpec& s);
void to_json(nlohmann::json& j, const SimulationConfig& c);
void from_json(const nlohmann::json& j, SimulationConfig& c);
void to_json(nlohmann::json& j, const RecsysConfig& c);
void from_json(const nlohmann::json& j, RecsysConfig& c);
void to_json(nlohmann::json& j, const ActivityModel& m);
void from_json(const nlohmann::json& j, ActivityModel& m);

}  // namespace usersim
