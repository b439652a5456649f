#include "usersim/engine/engine.hpp"

#include <algorithm>
#include <sstream>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/engine/checkpoint.hpp"
#include "usersim/llm/key_pool.hpp"
#include "usersim/llm/mock_backend.hpp"
#include "usersim/llm/prompt_kind.hpp"
#include "usersim/llm/remote_backend.hpp"

namespace usersim {

using nlohmann::json;

namespace {

constexpr std::uint64_t tag(std::string_view s) { return hash_text(s); }

json optional_agent(const std::optional<AgentId>& a) { return a ? json(a->value) : json(nullptr); }

std::vector<std::string> titles_of(const std::vector<const Item*>& items) {
    std::vector<std::string> out;
    for (const auto* i : items) out.push_back(i->title);
    return out;
}

std::vector<ItemId> ids_of(const std::vector<const Item*>& items) {
    std::vector<ItemId> out;
    for (const auto* i : items) out.push_back(i->id);
    return out;
}

bool has_title(const std::vector<std::string>& list, const std::string& title) {
    const auto key = text::title_key(title);
    return std::any_of(list.begin(), list.end(), [&](const auto& t) { return text::title_key(t) == key; });
}

json warnings_json(const std::vector<std::string>& w) { return json(w); }

}  // namespace

json Event::to_json() const {
    return json{{"round", round}, {"seq", seq}, {"kind", kind}, {"agent", optional_agent(agent)}, {"payload", payload}};
}

Event Event::from_json(const json& j) {
    Event e;
    e.round = j.at("round").get<std::uint64_t>();
    e.seq = j.at("seq").get<std::uint64_t>();
    e.kind = j.at("kind").get<std::string>();
    if (!j.at("agent").is_null()) e.agent = AgentId{j.at("agent").get<std::uint32_t>()};
    e.payload = j.at("payload");
    return e;
}

std::string Event::to_line() const { return to_json().dump(); }

std::shared_ptr<LlmPort> make_port(const SimulationConfig& config, std::shared_ptr<const ItemCatalog> catalog) {
    std::shared_ptr<LlmPort> port;
    if (config.llm.backend == "mock") {
        MockPolicyState state;
        state.seed = config.seed;
        port = std::make_shared<MockBackend>(std::move(state), std::move(catalog), config.llm.embed_dim);
    } else {
        RemoteConfig rc;
        rc.base_url = config.llm.base_url;
        rc.model = config.llm.model;
        rc.embedding_model = config.llm.embedding_model;
        rc.embed_dim = config.llm.embed_dim;
        rc.max_concurrency_per_key = config.llm.max_concurrency_per_key;
        rc.request_timeout = std::chrono::milliseconds(config.llm.timeout_ms);
        auto pool = std::make_shared<KeyPool>(config.llm.keys, config.llm.max_concurrency_per_key);
        port = std::make_shared<RemoteBackend>(rc, pool);
    }
    port->set_default_temperature(config.llm.temperature);
    port->set_determinism(config.determinism);
    return port;
}

struct Engine::RoundContext {
    std::uint64_t round = 0;
    CategoryExposure exposure;
    RoundStats stats;
    std::vector<InteractionEvent> interactions;
};

Engine::Engine(SimulationConfig config, std::shared_ptr<const ItemCatalog> catalog, std::vector<AgentProfile> profiles,
               SocialGraph graph, std::shared_ptr<LlmPort> port)
    : config_(std::move(config)), catalog_(std::move(catalog)), port_(std::move(port)), graph_(std::move(graph)) {
    config_.validate();
    if (!catalog_ || catalog_->empty()) throw SimError(ErrorCode::InvalidInput, "engine needs a non-empty catalog");
    if (!port_) throw SimError(ErrorCode::InvalidInput, "engine needs an LLM port");
    if (profiles.empty()) throw SimError(ErrorCode::InvalidInput, "engine needs at least one agent");
    for (auto& p : profiles) {
        validate_profile(p, catalog_.get());
        if (agents_.count(p.id)) throw SimError(ErrorCode::DuplicateId, "agent id " + p.id.str() + " appears twice");
        AgentState s;
        s.memory.config = config_.memory;
        s.profile = std::move(p);
        graph_.add_node(s.profile.id);
        agents_.emplace(s.profile.id, std::move(s));
    }
    for (const auto& n : graph_.nodes())
        if (!agents_.count(n)) throw SimError(ErrorCode::InvalidInput, "graph node " + n.str() + " is not an agent");
    if (!graph_.well_formed()) throw SimError(ErrorCode::InvalidInput, "social graph is not symmetric");
    // profile relationships mirror the graph
    for (auto& [id, s] : agents_) {
        s.profile.relationships.clear();
        for (auto f : graph_.friends(id)) s.profile.relationships[f] = graph_.label(id, f);
    }
    clock_ = SimClock(parse_datetime(config_.start_time), std::chrono::minutes(config_.round_minutes));
    recommender_ = make_recommender(catalog_, config_.recsys, config_.seed);
    init_services();
}

void Engine::init_services() {
    port_->set_determinism(config_.determinism);
    LlmPort* port = port_.get();
    search_ = std::make_unique<SearchIndex>(catalog_, [port](std::string_view q) { return port->embed(q); });
}

void Engine::emit(std::string kind, std::optional<AgentId> agent, json payload) {
    Event e{clock_.round_index(), next_seq_++, std::move(kind), agent, std::move(payload)};
    events_.push_back(e);
    if (listener_) listener_(events_.back());
}

const AgentState& Engine::agent(AgentId id) const {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw SimError(ErrorCode::InvalidInput, "unknown agent " + id.str());
    return it->second;
}

AgentState& Engine::mutable_agent(AgentId id) {
    auto it = agents_.find(id);
    if (it == agents_.end()) throw SimError(ErrorCode::InvalidInput, "unknown agent " + id.str());
    return it->second;
}

std::string Engine::name_of(AgentId id) const {
    auto it = agents_.find(id);
    return it == agents_.end() ? "Agent " + id.str() : it->second.profile.name;
}

NameLookup Engine::name_lookup() const {
    return [this](AgentId id) { return name_of(id); };
}

void Engine::require_between_rounds(const char* what) const {
    if (in_round_)
        throw SimError(ErrorCode::PreconditionViolation,
                       std::string(what) + " is only allowed between rounds; pause the simulation first");
}

std::string Engine::summary_for(AgentId id, const std::string& kind, const std::string& observation) {
    const auto& s = agent(id);
    if (const auto* cached = summaries_.find(id, s.profile.version, kind)) return *cached;
    auto summary = summarize_profile_for(*port_, s.profile, observation, name_lookup());
    summaries_.put(id, s.profile.version, kind, summary);
    return summary;
}

AgentPromptView Engine::view_of(AgentId id, const std::string& summary_kind, const std::string& observation,
                                const std::string& memory_query) {
    AgentPromptView v;
    v.summary = summary_for(id, summary_kind, observation);
    const auto& s = agent(id);
    v.name = s.profile.name;
    v.age = s.profile.age;
    v.heard = s.heard;
    v.watched = s.watched;
    v.readout = read_memory(s.memory, *port_, memory_query);
    return v;
}

ObserveResult Engine::observe_internal(AgentId id, std::string_view text) {
    auto& s = mutable_agent(id);
    auto r = usersim::observe(s.memory, *port_, text, clock_);
    json promotions = json::array();
    for (const auto& p : r.promotions) {
        json pj = {{"specific", p.specific.id}};
        pj["insight"] = p.insight ? json(p.insight->content) : json(nullptr);
        promotions.push_back(std::move(pj));
    }
    emit("memory_write", id,
         {{"record", r.record.id},
          {"content", r.record.content},
          {"importance", r.record.importance},
          {"enhanced", r.enhancements.size()},
          {"promotions", promotions},
          {"evicted", r.evicted},
          {"warnings", warnings_json(r.warnings)}});
    return r;
}

ObserveResult Engine::observe(AgentId id, std::string_view text) {
    require_between_rounds("observe");
    return observe_internal(id, text);
}

void Engine::add_watched(AgentId id, const std::string& title) {
    require_between_rounds("add_watched");
    mutable_agent(id).watched.push_back(title);
    emit("add_watched", id, {{"title", title}});
}

void Engine::add_heard(AgentId id, const std::string& title) {
    require_between_rounds("add_heard");
    mutable_agent(id).heard.push_back(title);
    emit("add_heard", id, {{"title", title}});
}

void Engine::pause() {
    if (paused_) return;
    paused_ = true;
    emit("pause", std::nullopt, json::object());
}

void Engine::resume() {
    if (!paused_) return;
    paused_ = false;
    emit("resume", std::nullopt, json::object());
}

std::string Engine::interview(AgentId id, const std::string& question) {
    require_between_rounds("interview");
    if (text::trim(question).empty()) throw SimError(ErrorCode::InvalidInput, "interview question is empty");
    const auto& s = agent(id);
    const auto instruction = interview_instruction(s.profile.name, question);
    std::string answer;
    try {
        // the cache is left untouched so the probe leaves no trace in agent state
        const auto* cached = summaries_.find(id, s.profile.version, "interview");
        AgentPromptView v;
        v.summary = cached ? *cached : summarize_profile_for(*port_, s.profile, question, name_lookup());
        v.name = s.profile.name;
        v.age = s.profile.age;
        v.heard = s.heard;
        v.watched = s.watched;
        v.readout = read_memory(s.memory, *port_, question);
        const auto bundle = single_agent_bundle(v, clock_, instruction);
        LlmChannel llm(*port_, config_.llm.max_tokens);
        DecisionRequest req{id, DecisionKind::Interview, build_prompt(bundle), {{"question", question}}, 0};
        auto out = llm.decide(req);
        if (!out) throw SimError(ErrorCode::InterviewFailed, "no answer");
        answer = text::trim(text::first_nonempty_line(*out));
    } catch (const SimError& e) {
        if (e.code() == ErrorCode::InterviewFailed) throw;
        throw SimError(ErrorCode::InterviewFailed, s.profile.name + ": " + e.what());
    }
    if (answer.empty()) throw SimError(ErrorCode::InterviewFailed, s.profile.name + ": empty answer");
    emit("interview", id, {{"question", question}, {"answer", answer}});
    return answer;
}

void Engine::edit_profile(AgentId id, const ProfilePatch& patch) {
    require_between_rounds("edit_profile");
    if (!paused_)
        throw SimError(ErrorCode::PreconditionViolation, "edit_profile requires a paused simulation");
    auto& s = mutable_agent(id);
    auto updated = apply_patch(s.profile, patch, catalog_.get());
    json before, after;
    to_json(before, s.profile);
    to_json(after, updated);
    s.profile = std::move(updated);
    summaries_.invalidate(id);
    json diff = json::object();
    for (auto& [k, v] : after.items())
        if (before[k] != v) diff[k] = {{"before", before[k]}, {"after", v}};
    emit("edit_profile", id, {{"version", s.profile.version}, {"changes", diff}});
}

void Engine::schedule(InterventionSpec spec) {
    require_between_rounds("schedule");
    spec.validate();
    for (auto a : spec.agents) agent(a);
    json j;
    to_json(j, spec);
    config_.interventions.push_back(std::move(spec));
    emit("schedule", std::nullopt, j);
}

void Engine::attach_role_play(std::shared_ptr<RolePlaySession> session) {
    require_between_rounds("attach_role_play");
    if (!session) throw SimError(ErrorCode::InvalidInput, "null role-play session");
    const auto id = session->agent();
    agent(id);
    if (auto it = sessions_.find(id); it != sessions_.end() && it->second->connected())
        throw SimError(ErrorCode::PreconditionViolation, "agent " + id.str() + " is already role-played");
    sessions_[id] = std::move(session);
    emit("role_play_attached", id, json::object());
}

void Engine::detach_role_play(AgentId id) {
    if (sessions_.erase(id)) emit("role_play_detached", id, json::object());
}

std::shared_ptr<RolePlaySession> Engine::role_play(AgentId id) const {
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

bool Engine::rec_strategy_for(AgentId id, std::uint64_t round, std::size_t& n) const {
    bool active = false;
    n = 0;
    for (const auto& s : config_.interventions) {
        if (s.strategy != "rec" || round < s.start_round || (round - s.start_round) % s.period != 0) continue;
        if (!s.agents.empty() && std::find(s.agents.begin(), s.agents.end(), id) == s.agents.end()) continue;
        active = true;
        n = std::max(n, s.n);
    }
    return active;
}

void Engine::fire_interventions(RoundContext& ctx) {
    std::vector<AgentProfile> profiles;
    for (const auto& [id, s] : agents_) profiles.push_back(s.profile);
    for (std::size_t i = 0; i < config_.interventions.size(); ++i) {
        const auto& spec = config_.interventions[i];
        if (spec.strategy != "soc" || spec.start_round > ctx.round || fired_.count(i)) continue;
        fired_.insert(i);
        std::vector<AgentId> targets = spec.agents;
        if (targets.empty())
            for (const auto& [id, s] : agents_) targets.push_back(id);
        for (auto id : targets) {
            auto added = add_heterophilous_friend(graph_, profiles, id, spec.n);
            for (auto f : added) {
                mutable_agent(id).profile.relationships[f] = graph_.label(id, f);
                mutable_agent(f).profile.relationships[id] = graph_.label(id, f);
                summaries_.invalidate(f);
                // keep the profile copies used for later targets in sync
                for (auto& p : profiles) {
                    if (p.id == id) p.relationships[f] = "friend";
                    if (p.id == f) p.relationships[id] = "friend";
                }
            }
            summaries_.invalidate(id);
            std::vector<std::uint32_t> ids;
            for (auto f : added) ids.push_back(f.value);
            emit("intervention", id, {{"strategy", "soc"}, {"new_friends", ids}});
        }
    }
}

void Engine::run(std::uint64_t rounds) {
    for (std::uint64_t i = 0; i < rounds; ++i) run_round();
}

void Engine::run_round() {
    if (paused_) throw SimError(ErrorCode::PreconditionViolation, "simulation is paused");
    if (in_round_) throw SimError(ErrorCode::PreconditionViolation, "a round is already running");
    in_round_ = true;
    RoundContext ctx;
    ctx.round = clock_.round_index();
    ctx.stats.round = ctx.round;
    try {
        emit("round_start", std::nullopt, {{"time", clock_.iso_minutes()}});
        recommender_->set_round(ctx.round);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (!it->second->connected()) {
                const auto id = it->first;
                it = sessions_.erase(it);
                emit("role_play_detached", id, {{"reason", "disconnected"}});
            } else {
                ++it;
            }
        }
        fire_interventions(ctx);

        for (auto& [id, s] : agents_) {
            auto rng = make_rng(config_.seed, {ctx.round, id.value, tag("activation")});
            const double p = activation_probability(s.profile.activity_level, config_.activity);
            if (!(uniform01(rng) < p)) continue;
            ++ctx.stats.active;
            emit("active", id, {{"p", p}});
            try {
                run_agent(id, ctx);
            } catch (const SimError& e) {
                ++ctx.stats.failures;
                emit("agent_failed", id, {{"code", to_string(e.code())}, {"message", e.what()}});
            }
        }

        recommender_->train(ctx.interactions);
        emit("train", std::nullopt, {{"events", ctx.interactions.size()}, {"model", recommender_->name()}});
        interactions_.insert(interactions_.end(), ctx.interactions.begin(), ctx.interactions.end());

        for (auto& [id, s] : agents_) {
            auto rng = make_rng(config_.seed, {ctx.round, id.value, tag("forget")});
            auto removed = apply_forgetting(s.memory, clock_, rng);
            if (!removed.empty()) emit("forget", id, {{"records", removed}});
        }

        const int period = config_.memory.reflection_period;
        if (period > 0 && (ctx.round + 1) % static_cast<std::uint64_t>(period) == 0) {
            for (auto& [id, s] : agents_) {
                std::vector<std::string> warnings;
                auto added = reflect(s.memory, *port_, clock_, &warnings);
                if (added.empty() && warnings.empty()) continue;
                json contents = json::array();
                for (const auto& r : added) contents.push_back(r.content);
                emit("reflect", id, {{"insights", contents}, {"warnings", warnings}});
            }
        }

        for (const auto& [user, cats] : ctx.exposure.raw())
            for (const auto& [c, w] : cats) exposure_.add(user, c, w);
        ctx.stats.entropy = cocoon_entropy(ctx.exposure);
        ctx.stats.entropy_cumulative = cocoon_entropy(exposure_);
        stats_.push_back(ctx.stats);
        const auto& st = ctx.stats;
        emit("round_end", std::nullopt,
             {{"entropy", st.entropy},
              {"entropy_cumulative", st.entropy_cumulative},
              {"active", st.active},
              {"recommender", st.recommender},
              {"social", st.social},
              {"buys", st.buys},
              {"searches", st.searches},
              {"chats", st.chats},
              {"posts", st.posts},
              {"failures", st.failures}});
        clock_ = clock_.advanced();
    } catch (...) {
        in_round_ = false;
        throw;
    }
    in_round_ = false;
}

void Engine::run_agent(AgentId id, RoundContext& ctx) {
    const auto& name = agent(id).profile.name;
    LlmChannel llm(*port_, config_.llm.max_tokens);
    auto session_it = sessions_.find(id);
    RoutingChannel channel(llm, session_it == sessions_.end() ? nullptr : session_it->second.get(), name);

    const std::string observation = name + " is deciding what to do next.";
    auto view = view_of(id, "take_action", observation, observation);
    const auto bundle = single_agent_bundle(view, clock_, "");
    auto d = decide_top_action(channel, id, name, bundle);
    emit("top_action", id,
         {{"action", render_action(d.action.kind)},
          {"attempts", d.attempts},
          {"defaulted", d.defaulted},
          {"warnings", d.warnings}});
    if (d.action.is<act::EnterRecommender>()) {
        ++ctx.stats.recommender;
        recommender_flow(id, channel, ctx);
    } else if (d.action.is<act::EnterSocial>()) {
        ++ctx.stats.social;
        social_flow(id, channel, ctx);
    }
}

void Engine::recommender_flow(AgentId id, DecisionChannel& channel, RoundContext& ctx) {
    const auto name = agent(id).profile.name;
    const std::size_t k = config_.recsys.page_size;
    std::size_t rec_n = 0;
    const bool randomize = rec_strategy_for(id, ctx.round, rec_n);
    int pages_shown = 0;
    int searches = 0;
    std::size_t page_index = 0;
    std::string query;

    auto show_page = [&]() -> std::vector<const Item*> {
        std::vector<const Item*> page;
        if (query.empty()) {
            page = recommender_->recommend_page(id, page_index, k);
            json replaced = json::array();
            if (randomize && !page.empty()) {
                auto rng = make_rng(config_.seed, {ctx.round, id.value, tag("rec-strategy"), page_index});
                auto before = page;
                page = intervene_randomize(page, rec_n, *catalog_, rng);
                for (std::size_t i = 0; i < page.size(); ++i)
                    if (page[i] != before[i]) replaced.push_back(i);
            }
            for (const auto* item : page) ctx.exposure.add_impression(id, *item);
            mutable_agent(id).last_page = ids_of(page);
            emit("rec_page", id, {{"page", page_index}, {"items", ids_of(page)}, {"randomized", replaced}});
        } else {
            auto all = search_->search(query, k * (page_index + 1));
            if (all.size() > k * page_index) page.assign(all.begin() + static_cast<std::ptrdiff_t>(k * page_index), all.end());
            emit("search_page", id, {{"page", page_index}, {"query", query}, {"items", ids_of(page)}});
        }
        ++pages_shown;
        return page;
    };

    auto page = show_page();
    const int max_steps = config_.recsys.max_pages + config_.recsys.max_searches + 1;
    for (int step = 0; step < max_steps; ++step) {
        const std::string observation = name + " is browsing the recommender system.";
        const std::string memory_query =
            observation + " " + (query.empty() ? text::join(titles_of(page), ", ") : "Searching for " + query);
        auto view = view_of(id, "recommender", observation, memory_query);
        const auto bundle = single_agent_bundle(view, clock_, "");
        auto d = decide_recommender_action(channel, id, name, bundle, page, query);
        emit("rec_action", id,
             {{"action", render_action(d.action.kind)},
              {"attempts", d.attempts},
              {"defaulted", d.defaulted},
              {"warnings", d.warnings}});

        if (d.action.is<act::Buy>()) {
            const auto& buy = d.action.as<act::Buy>();
            const Item* item = catalog_->find_by_title(buy.title);
            if (!item) return;
            const auto source = query.empty() ? InteractionSource::Recommendation : InteractionSource::Search;
            ctx.interactions.push_back({id, item->id, source, ctx.round});
            ++ctx.stats.buys;
            emit("interaction", id, {{"item", item->id}, {"source", to_string(source)}});
            mutable_agent(id).watched.push_back(item->title);

            auto fview = view_of(id, "recommender", observation, name + " just watched <" + item->title + ">");
            const auto fbundle = single_agent_bundle(fview, clock_, "");
            auto feeling = generate_feeling(channel, id, name, fbundle, *item);
            const auto ftext = feeling.action.as<act::Feeling>().text;
            emit("feeling", id, {{"item", item->id}, {"text", ftext}, {"defaulted", feeling.defaulted}});
            observe_internal(id, name + " watched <" + item->title + "> on the recommender system and felt: " + ftext);
            return;
        }
        if (d.action.is<act::NextPage>()) {
            if (pages_shown >= config_.recsys.max_pages) {
                emit("session_cap", id, {{"limit", "pages"}});
                return;
            }
            ++page_index;
            page = show_page();
            continue;
        }
        if (d.action.is<act::Search>()) {
            if (searches >= config_.recsys.max_searches) {
                emit("session_cap", id, {{"limit", "searches"}});
                return;
            }
            ++searches;
            ++ctx.stats.searches;
            query = text::normalize_space(d.action.as<act::Search>().query);
            if (query.size() > 2 && query.front() == '<' && query.back() == '>') query = query.substr(1, query.size() - 2);
            if (query.empty()) return;
            page_index = 0;
            page = show_page();
            continue;
        }
        return;  // Leave
    }
    emit("session_cap", id, {{"limit", "steps"}});
}

void Engine::social_flow(AgentId id, DecisionChannel& channel, RoundContext& ctx) {
    const auto name = agent(id).profile.name;
    const auto friends = graph_.friends(id);
    if (friends.empty()) {
        emit("social_idle", id, {{"reason", "no friends"}});
        return;
    }
    const auto& features = agent(id).profile.features;
    const bool chatter = features.count(Feature::Chatter) > 0;
    const bool poster = features.count(Feature::Poster) > 0;
    const double p_chat = chatter == poster ? 0.5 : (chatter ? 1.0 : 0.0);
    auto rng = make_rng(config_.seed, {ctx.round, id.value, tag("social")});
    const bool chat = uniform01(rng) < p_chat;

    if (chat) {
        AgentId partner = friends.front();
        std::uint64_t best = ~std::uint64_t{0};
        const auto& lc = agent(id).last_contact;
        for (auto f : friends) {
            auto it = lc.find(f);
            const std::uint64_t v = it == lc.end() ? 0 : it->second;
            if (v < best) {
                best = v;
                partner = f;
            }
        }
        const auto pname = agent(partner).profile.name;
        const std::string observation = name + " is chatting with " + pname + ".";
        auto va = view_of(id, "social", name + " is on social media with friends.", observation);
        auto vb = view_of(partner, "social", pname + " is on social media with friends.", observation);
        const auto bundle = two_agent_bundle(va, vb, clock_, "");
        auto d = generate_dialogue(channel, id, name, pname, bundle, config_.max_dialogue_turns);
        const auto& turns = d.action.as<act::ChatTurns>().turns;
        std::string transcript;
        json tj = json::array();
        for (const auto& t : turns) {
            transcript += "[" + t.speaker + "]: " + t.text + "\n";
            tj.push_back({{"speaker", t.speaker}, {"text", t.text}});
        }
        std::vector<std::string> mentioned;
        for (const auto& m : extract_item_mentions(transcript, *catalog_))
            if (m.item && !has_title(mentioned, m.item->title)) mentioned.push_back(m.item->title);
        ++ctx.stats.chats;
        emit("chat", id,
             {{"partner", partner.value}, {"turns", tj}, {"items", mentioned}, {"attempts", d.attempts},
              {"warnings", d.warnings}});
        for (auto who : {id, partner}) {
            auto& s = mutable_agent(who);
            for (const auto& t : mentioned) s.heard.push_back(t);
        }
        mutable_agent(id).last_contact[partner] = ctx.round + 1;
        mutable_agent(partner).last_contact[id] = ctx.round + 1;
        observe_internal(id, text::trim(transcript));
        observe_internal(partner, text::trim(transcript));
        return;
    }

    const std::string observation = name + " wants to post for all acquaintances.";
    auto view = view_of(id, "social", name + " is on social media with friends.", observation);
    const auto bundle = single_agent_bundle(view, clock_, "");
    std::vector<std::string> known = agent(id).watched;
    for (const auto& h : agent(id).heard)
        if (!has_title(known, h)) known.push_back(h);
    auto d = generate_post(channel, id, name, bundle, known);
    const auto post_text = d.action.as<act::Post>().text;
    std::vector<std::string> mentioned;
    for (const auto& m : extract_item_mentions(post_text, *catalog_))
        if (m.item && !has_title(mentioned, m.item->title)) mentioned.push_back(m.item->title);
    std::vector<std::uint32_t> recipients;
    for (auto f : friends) recipients.push_back(f.value);
    ++ctx.stats.posts;
    emit("post", id,
         {{"text", post_text}, {"recipients", recipients}, {"items", mentioned}, {"attempts", d.attempts},
          {"warnings", d.warnings}});
    const std::string line = name + " posted: " + post_text;
    observe_internal(id, line);
    for (auto f : friends) {
        auto& s = mutable_agent(f);
        for (const auto& t : mentioned) s.heard.push_back(t);
        observe_internal(f, line);
    }
}

SurveyResult Engine::run_survey(SurveyKind kind, const std::string& title, const std::map<AgentId, int>& previous,
                                const std::vector<AgentId>& agents) {
    require_between_rounds("run_survey");
    if (kind == SurveyKind::MovieScore && text::trim(title).empty())
        throw SimError(ErrorCode::InvalidInput, "movie-score survey needs a title");
    std::vector<AgentId> ids = agents;
    if (ids.empty())
        for (const auto& [id, s] : agents_) ids.push_back(id);
    SurveyResult result;
    LlmChannel llm(*port_, config_.llm.max_tokens);
    for (auto id : ids) {
        const auto& s = agent(id);
        std::string instruction;
        if (kind == SurveyKind::MovieScore) {
            std::optional<int> prev;
            if (auto it = previous.find(id); it != previous.end()) prev = it->second;
            instruction = movie_score_instruction(s.profile.name, title, prev);
        } else {
            std::vector<const Item*> items;
            for (const auto& iid : s.last_page)
                if (const auto* item = catalog_->find(iid)) items.push_back(item);
            if (items.empty()) {
                result.excluded.push_back(id);
                result.warnings.push_back(s.profile.name + ": no recommendations to rate");
                continue;
            }
            instruction = satisfaction_instruction(s.profile.name, items);
        }
        const auto* cached = summaries_.find(id, s.profile.version, "survey");
        AgentPromptView v;
        v.summary = cached ? *cached : summarize_profile_for(*port_, s.profile, instruction, name_lookup());
        v.name = s.profile.name;
        v.age = s.profile.age;
        v.heard = s.heard;
        v.watched = s.watched;
        v.readout = read_memory(s.memory, *port_, kind == SurveyKind::MovieScore ? "<" + title + ">" : instruction);
        const auto prompt = build_prompt(single_agent_bundle(v, clock_, instruction));
        std::optional<int> score;
        for (int attempt = 0; attempt < 2 && !score; ++attempt) {
            std::optional<std::string> answer;
            try {
                DecisionRequest req{id, DecisionKind::Interview,
                                    attempt == 0 ? prompt
                                                 : prompt + "\n\n" + std::string(markers::kRetry) +
                                                       " Respond with a single integer from 1 to 10.",
                                    json::object(), attempt};
                answer = llm.decide(req);
            } catch (const SimError& e) {
                result.warnings.push_back(s.profile.name + ": " + e.what());
                continue;
            }
            if (!answer) continue;
            auto parsed = parse_survey_score(*answer);
            if (!parsed.score) {
                result.warnings.push_back(s.profile.name + ": unparseable survey answer '" +
                                          text::normalize_space(*answer) + "'");
                continue;
            }
            if (parsed.clamped)
                result.warnings.push_back(s.profile.name + ": survey answer '" + text::normalize_space(*answer) +
                                          "' clamped to " + std::to_string(*parsed.score));
            score = parsed.score;
        }
        if (score)
            result.scores[id] = *score;
        else
            result.excluded.push_back(id);
    }
    return result;
}

std::vector<ItemId> Engine::select_items(AgentId id, const std::vector<const Item*>& candidates, int count) {
    require_between_rounds("select_items");
    const auto& s = agent(id);
    const auto instruction = selection_instruction(s.profile.name, candidates, count);
    AgentPromptView v;
    v.summary = summarize_profile_for(*port_, s.profile, instruction, name_lookup());
    v.name = s.profile.name;
    v.age = s.profile.age;
    v.heard = s.heard;
    v.watched = s.watched;
    v.readout = read_memory(s.memory, *port_, instruction);
    const auto answer = port_->complete(build_prompt(single_agent_bundle(v, clock_, instruction)),
                                        config_.llm.max_tokens);
    auto picked = parse_selection(answer, candidates);
    if (static_cast<int>(picked.size()) > count) picked.resize(static_cast<std::size_t>(count));
    return picked;
}

std::string Engine::event_log() const {
    std::string out;
    for (const auto& e : events_) {
        out += e.to_line();
        out += '\n';
    }
    return out;
}

const std::vector<std::string>& Engine::metric_names() {
    static const std::vector<std::string> names = {"entropy", "entropy_cumulative", "active",   "recommender",
                                                   "social",  "buys",               "searches", "chats",
                                                   "posts",   "failures"};
    return names;
}

std::vector<MetricPoint> Engine::metric_series(const std::string& name) const {
    std::vector<MetricPoint> out;
    for (const auto& s : stats_) {
        double v;
        if (name == "entropy") v = s.entropy;
        else if (name == "entropy_cumulative") v = s.entropy_cumulative;
        else if (name == "active") v = static_cast<double>(s.active);
        else if (name == "recommender") v = static_cast<double>(s.recommender);
        else if (name == "social") v = static_cast<double>(s.social);
        else if (name == "buys") v = static_cast<double>(s.buys);
        else if (name == "searches") v = static_cast<double>(s.searches);
        else if (name == "chats") v = static_cast<double>(s.chats);
        else if (name == "posts") v = static_cast<double>(s.posts);
        else if (name == "failures") v = static_cast<double>(s.failures);
        else return {};
        out.push_back({s.round, name, v});
    }
    return out;
}

namespace {

json stats_to_json(const RoundStats& s) {
    return {{"round", s.round},         {"entropy", s.entropy}, {"entropy_cumulative", s.entropy_cumulative},
            {"active", s.active},       {"recommender", s.recommender}, {"social", s.social},
            {"buys", s.buys},           {"searches", s.searches}, {"chats", s.chats},
            {"posts", s.posts},         {"failures", s.failures}};
}

RoundStats stats_from_json(const json& j) {
    RoundStats s;
    s.round = j.at("round");
    s.entropy = j.at("entropy");
    s.entropy_cumulative = j.at("entropy_cumulative");
    s.active = j.at("active");
    s.recommender = j.at("recommender");
    s.social = j.at("social");
    s.buys = j.at("buys");
    s.searches = j.at("searches");
    s.chats = j.at("chats");
    s.posts = j.at("posts");
    s.failures = j.at("failures");
    return s;
}

}  // namespace

json Engine::state_json() const {
    json agents = json::array();
    for (const auto& [id, s] : agents_) {
        json lc = json::array();
        for (const auto& [f, r] : s.last_contact) lc.push_back({f.value, r});
        json pj;
        to_json(pj, s.profile);
        json mj;
        to_json(mj, s.memory);
        agents.push_back({{"profile", pj},
                          {"memory", mj},
                          {"heard", s.heard},
                          {"watched", s.watched},
                          {"last_page", s.last_page},
                          {"last_contact", lc}});
    }
    json events = json::array();
    for (const auto& e : events_) events.push_back(e.to_json());
    json stats = json::array();
    for (const auto& s : stats_) stats.push_back(stats_to_json(s));
    json exposure = json::array();
    for (const auto& [u, cats] : exposure_.raw()) exposure.push_back({{"user", u.value}, {"counts", cats}});
    json interactions = json::array();
    for (const auto& e : interactions_)
        interactions.push_back({{"user", e.user.value}, {"item", e.item}, {"source", to_string(e.source)}, {"round", e.round}});
    json config;
    to_json(config, config_);
    json clock;
    to_json(clock, clock_);
    return {{"config", config},
            {"catalog_csv", catalog_to_csv(*catalog_)},
            {"clock", clock},
            {"agents", agents},
            {"graph", graph_.to_json()},
            {"recommender", recommender_->to_json()},
            {"summaries", summaries_.to_json()},
            {"events", events},
            {"next_seq", next_seq_},
            {"stats", stats},
            {"exposure", exposure},
            {"interactions", interactions},
            {"fired", fired_},
            {"paused", paused_}};
}

std::string Engine::checkpoint() const {
    if (in_round_) throw SimError(ErrorCode::PreconditionViolation, "checkpoint is only allowed between rounds");
    return wrap_checkpoint(state_json());
}

std::unique_ptr<Engine> Engine::load(std::string_view bytes, std::shared_ptr<LlmPort> port) {
    const json st = unwrap_checkpoint(bytes);
    if (!port) throw SimError(ErrorCode::LoadFailed, "no LLM port to attach the restored engine to");
    std::unique_ptr<Engine> e(new Engine());
    try {
        e->config_ = st.at("config").get<SimulationConfig>();
        e->catalog_ = std::make_shared<const ItemCatalog>(load_catalog_csv(st.at("catalog_csv").get<std::string>()));
        e->port_ = std::move(port);
        e->clock_ = st.at("clock").get<SimClock>();
        for (const auto& aj : st.at("agents")) {
            AgentState s;
            s.profile = aj.at("profile").get<AgentProfile>();
            s.memory = aj.at("memory").get<MemoryStores>();
            s.heard = aj.at("heard").get<std::vector<std::string>>();
            s.watched = aj.at("watched").get<std::vector<std::string>>();
            s.last_page = aj.at("last_page").get<std::vector<ItemId>>();
            for (const auto& p : aj.at("last_contact"))
                s.last_contact[AgentId{p.at(0).get<std::uint32_t>()}] = p.at(1).get<std::uint64_t>();
            const auto id = s.profile.id;
            e->agents_.emplace(id, std::move(s));
        }
        e->graph_ = SocialGraph::from_json(st.at("graph"));
        e->recommender_ = make_recommender(e->catalog_, e->config_.recsys, e->config_.seed);
        e->recommender_->load_json(st.at("recommender"));
        e->summaries_ = SummaryCache::from_json(st.at("summaries"));
        for (const auto& ej : st.at("events")) e->events_.push_back(Event::from_json(ej));
        e->next_seq_ = st.at("next_seq").get<std::uint64_t>();
        for (const auto& sj : st.at("stats")) e->stats_.push_back(stats_from_json(sj));
        CategoryExposure::Raw raw;
        for (const auto& x : st.at("exposure"))
            raw[AgentId{x.at("user").get<std::uint32_t>()}] = x.at("counts").get<std::map<std::string, double>>();
        e->exposure_ = CategoryExposure::from_raw(std::move(raw));
        for (const auto& x : st.at("interactions")) {
            InteractionEvent ie;
            ie.user = AgentId{x.at("user").get<std::uint32_t>()};
            ie.item = x.at("item").get<std::string>();
            ie.source = x.at("source").get<std::string>() == "search" ? InteractionSource::Search
                                                                      : InteractionSource::Recommendation;
            ie.round = x.at("round").get<std::uint64_t>();
            e->interactions_.push_back(std::move(ie));
        }
        e->fired_ = st.at("fired").get<std::set<std::size_t>>();
        e->paused_ = st.at("paused").get<bool>();
    } catch (const SimError& err) {
        throw SimError(ErrorCode::LoadFailed, std::string("checkpoint state is invalid: ") + err.what());
    } catch (const json::exception& err) {
        throw SimError(ErrorCode::LoadFailed, std::string("checkpoint state is incomplete: ") + err.what());
    }
    e->init_services();
    return e;
}

std::pair<std::unique_ptr<Engine>, std::unique_ptr<Engine>> Engine::fork() const {
    const auto bytes = checkpoint();
    return {load(bytes, port_), load(bytes, port_)};
}

}  // namespace usersim
