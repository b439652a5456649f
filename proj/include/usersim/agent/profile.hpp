#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "usersim/core/catalog.hpp"
#include "usersim/core/ids.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

enum class Feature { Watcher, Explorer, Critic, Chatter, Poster };

const char* to_string(Feature f);
std::optional<Feature> parse_feature(std::string_view name);
/// One-sentence description used in profile tables.
const char* describe(Feature f);
const std::vector<Feature>& all_features();

struct AgentProfile {
    AgentId id;
    std::string name;
    std::string gender;
    int age = 0;
    std::vector<std::string> traits;
    std::string career;
    std::vector<std::string> interests;
    std::set<Feature> features;
    std::map<AgentId, std::string> relationships;
    double activity_level = 1.0;
    std::uint64_t version = 0;  // bumped by every accepted edit

    bool operator==(const AgentProfile&) const = default;
};

/// Throws SimError(InvalidInput) naming the first violated field. When a catalog
/// is given, interests must be category labels of that catalog.
void validate_profile(const AgentProfile& p, const ItemCatalog* catalog = nullptr);

void to_json(nlohmann::json& j, const AgentProfile& p);
void from_json(const nlohmann::json& j, AgentProfile& p);

/// One JSON object per profile per line.
std::string profiles_to_jsonl(const std::vector<AgentProfile>& profiles);
std::vector<AgentProfile> profiles_from_jsonl(std::string_view content);

using NameLookup = std::function<std::string(AgentId)>;

/// "Name: ...\nAge: ...\n..." block, relationships rendered by name.
std::string render_profile_table(const AgentProfile& p, const NameLookup& names);

/// Fields an operator may patch on a paused simulation. Relationships are
/// managed by the social graph and cannot be patched.
struct ProfilePatch {
    std::optional<std::string> name;
    std::optional<std::string> gender;
    std::optional<int> age;
    std::optional<std::vector<std::string>> traits;
    std::optional<std::string> career;
    std::optional<std::vector<std::string>> interests;
    std::optional<std::set<Feature>> features;
    std::optional<double> activity_level;
};

/// Parses a JSON patch; unknown keys or "relationships" throw SimError(InvalidPatch).
ProfilePatch parse_profile_patch(const nlohmann::json& j);
/// Returns the patched copy with version + 1; throws InvalidPatch when the result is invalid.
AgentProfile apply_patch(const AgentProfile& p, const ProfilePatch& patch, const ItemCatalog* catalog);

// Profile generation strategies.

struct HandcraftedSpec {
    AgentProfile profile;
};

struct PartialProfile {
    AgentId id;
    std::string name;
    std::optional<int> age;
    std::optional<std::string> gender;
    std::optional<std::vector<std::string>> traits;
    std::optional<std::string> career;
    std::optional<std::vector<std::string>> interests;
    std::optional<std::set<Feature>> features;
};

struct DatasetHistory {
    AgentId id;
    std::string name;
    std::vector<ItemId> items;  // chronological
    std::size_t top_interests = 2;
    std::size_t seed_memories = 3;
};

using ProfileStrategy = std::variant<HandcraftedSpec, PartialProfile, DatasetHistory>;

struct GeneratedProfile {
    AgentProfile profile;
    /// Observations to ingest into the new agent's memory (dataset strategy only).
    std::vector<std::string> seed_observations;
    /// Titles the agent has watched according to its history (dataset strategy only).
    std::vector<std::string> watched;
};

GeneratedProfile generate_profile(const ProfileStrategy& strategy, const ItemCatalog& catalog, LlmPort* port);

std::string profile_completion_prompt(const PartialProfile& partial, const ItemCatalog& catalog);

/// Summarizes the parts of a profile relevant to an observation. Falls back to the
/// full profile table when the port fails; an observation echoed verbatim is removed.
std::string summarize_profile_for(LlmPort& port, const AgentProfile& p, std::string_view observation,
                                  const NameLookup& names);
std::string summary_prompt(const AgentProfile& p, std::string_view observation, const NameLookup& names);

/// Summaries keyed by (agent, profile version, observation kind).
class SummaryCache {
public:
    const std::string* find(AgentId agent, std::uint64_t version, const std::string& kind) const;
    void put(AgentId agent, std::uint64_t version, const std::string& kind, std::string summary);
    /// Drops entries for older versions of an agent.
    void invalidate(AgentId agent);
    std::size_t size() const noexcept { return entries_.size(); }

    nlohmann::json to_json() const;
    static SummaryCache from_json(const nlohmann::json& j);
    bool operator==(const SummaryCache&) const = default;

private:
    std::map<std::tuple<std::uint32_t, std::uint64_t, std::string>, std::string> entries_;
};

}  // namespace usersim
