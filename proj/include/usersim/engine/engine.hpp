#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "usersim/agent/agent.hpp"
#include "usersim/agent/profile.hpp"
#include "usersim/core/catalog.hpp"
#include "usersim/core/clock.hpp"
#include "usersim/engine/config.hpp"
#include "usersim/engine/role_play.hpp"
#include "usersim/llm/port.hpp"
#include "usersim/memory/memory.hpp"
#include "usersim/metrics/metrics.hpp"
#include "usersim/metrics/survey.hpp"
#include "usersim/recsys/recommender.hpp"
#include "usersim/social/social.hpp"

namespace usersim {

/// One line of the event log.
struct Event {
    std::uint64_t round = 0;
    std::uint64_t seq = 0;
    std::string kind;
    std::optional<AgentId> agent;
    nlohmann::json payload = nlohmann::json::object();

    nlohmann::json to_json() const;
    static Event from_json(const nlohmann::json& j);
    /// Compact JSON, keys sorted.
    std::string to_line() const;
    bool operator==(const Event&) const = default;
};

struct AgentState {
    AgentProfile profile;
    MemoryStores memory;
    std::vector<std::string> heard;    // titles, most recent last
    std::vector<std::string> watched;  // titles, most recent last
    std::vector<ItemId> last_page;     // most recent recommendation page
    std::map<AgentId, std::uint64_t> last_contact;  // friend -> round + 1 of the last chat

    bool operator==(const AgentState&) const = default;
};

struct RoundStats {
    std::uint64_t round = 0;
    double entropy = 0.0;             // over this round's recommended impressions
    double entropy_cumulative = 0.0;  // over every impression so far
    std::size_t active = 0;
    std::size_t recommender = 0;
    std::size_t social = 0;
    std::size_t buys = 0;
    std::size_t searches = 0;
    std::size_t chats = 0;
    std::size_t posts = 0;
    std::size_t failures = 0;

    bool operator==(const RoundStats&) const = default;
};

/// Builds the port a config asks for. The mock is seeded from the simulation seed.
std::shared_ptr<LlmPort> make_port(const SimulationConfig& config, std::shared_ptr<const ItemCatalog> catalog);

/// The round scheduler. Every state change goes through this class, on the
/// caller's thread, in ascending agent id order; commands are rejected mid-round.
class Engine {
public:
    using Listener = std::function<void(const Event&)>;

    Engine(SimulationConfig config, std::shared_ptr<const ItemCatalog> catalog, std::vector<AgentProfile> profiles,
           SocialGraph graph, std::shared_ptr<LlmPort> port);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    // Setup and harness hooks (between rounds only).
    /// Writes an observation into the agent's memory.
    ObserveResult observe(AgentId agent, std::string_view text);
    void add_watched(AgentId agent, const std::string& title);
    void add_heard(AgentId agent, const std::string& title);

    void run_round();
    void run(std::uint64_t rounds);

    void pause();
    void resume();
    bool paused() const noexcept { return paused_; }
    bool in_round() const noexcept { return in_round_; }

    /// Read-only probe: profile summary + memory readout + question. No memory write.
    std::string interview(AgentId agent, const std::string& question);
    /// Requires pause. Invalid patches throw InvalidPatch and leave state unchanged.
    void edit_profile(AgentId agent, const ProfilePatch& patch);
    void schedule(InterventionSpec spec);

    /// Survey every listed agent (all agents when empty). Movie-score surveys pass
    /// each agent's previous score when known. Read-only.
    SurveyResult run_survey(SurveyKind kind, const std::string& title = {},
                            const std::map<AgentId, int>& previous = {}, const std::vector<AgentId>& agents = {});
    /// Asks the agent to pick `count` of the candidates; returns the picked ids.
    std::vector<ItemId> select_items(AgentId agent, const std::vector<const Item*>& candidates, int count);

    /// Routes the agent's decisions to a human. At most one session per agent.
    void attach_role_play(std::shared_ptr<RolePlaySession> session);
    void detach_role_play(AgentId agent);
    std::shared_ptr<RolePlaySession> role_play(AgentId agent) const;

    std::string checkpoint() const;
    static std::unique_ptr<Engine> load(std::string_view bytes, std::shared_ptr<LlmPort> port);
    /// Two independent continuations of the current state.
    std::pair<std::unique_ptr<Engine>, std::unique_ptr<Engine>> fork() const;

    void set_listener(Listener listener) { listener_ = std::move(listener); }

    const SimulationConfig& config() const noexcept { return config_; }
    const ItemCatalog& catalog() const noexcept { return *catalog_; }
    std::shared_ptr<const ItemCatalog> catalog_ptr() const noexcept { return catalog_; }
    const SimClock& clock() const noexcept { return clock_; }
    std::uint64_t round() const noexcept { return clock_.round_index(); }
    const std::map<AgentId, AgentState>& agents() const noexcept { return agents_; }
    const AgentState& agent(AgentId id) const;
    const SocialGraph& graph() const noexcept { return graph_; }
    const Recommender& recommender() const noexcept { return *recommender_; }
    const std::vector<Event>& events() const noexcept { return events_; }
    /// The event log as JSONL.
    std::string event_log() const;
    const std::vector<RoundStats>& round_stats() const noexcept { return stats_; }
    const CategoryExposure& exposure() const noexcept { return exposure_; }
    const std::vector<InteractionEvent>& interactions() const noexcept { return interactions_; }
    const SummaryCache& summaries() const noexcept { return summaries_; }
    LlmPort& port() noexcept { return *port_; }
    /// Per-round series for one RoundStats field ("entropy", "buys", ...). Empty for unknown names.
    std::vector<MetricPoint> metric_series(const std::string& name) const;
    static const std::vector<std::string>& metric_names();

    nlohmann::json state_json() const;

private:
    struct RoundContext;
    Engine() = default;
    void init_services();
    void emit(std::string kind, std::optional<AgentId> agent, nlohmann::json payload);
    AgentState& mutable_agent(AgentId id);
    std::string name_of(AgentId id) const;
    NameLookup name_lookup() const;
    std::string summary_for(AgentId id, const std::string& kind, const std::string& observation);
    AgentPromptView view_of(AgentId id, const std::string& summary_kind, const std::string& observation,
                            const std::string& memory_query);
    ObserveResult observe_internal(AgentId id, std::string_view text);
    void require_between_rounds(const char* what) const;

    void fire_interventions(RoundContext& ctx);
    bool rec_strategy_for(AgentId id, std::uint64_t round, std::size_t& n) const;
    void run_agent(AgentId id, RoundContext& ctx);
    void recommender_flow(AgentId id, DecisionChannel& channel, RoundContext& ctx);
    void social_flow(AgentId id, DecisionChannel& channel, RoundContext& ctx);

    SimulationConfig config_;
    std::shared_ptr<const ItemCatalog> catalog_;
    std::shared_ptr<LlmPort> port_;
    std::unique_ptr<Recommender> recommender_;
    std::unique_ptr<SearchIndex> search_;
    SimClock clock_;
    std::map<AgentId, AgentState> agents_;
    SocialGraph graph_;
    SummaryCache summaries_;
    std::vector<Event> events_;
    std::uint64_t next_seq_ = 0;
    std::vector<RoundStats> stats_;
    CategoryExposure exposure_;
    std::vector<InteractionEvent> interactions_;
    std::set<std::size_t> fired_;  // indices of one-shot interventions already applied
    bool paused_ = false;
    bool in_round_ = false;
    std::map<AgentId, std::shared_ptr<RolePlaySession>> sessions_;
    Listener listener_;
};

}  // namespace usersim
