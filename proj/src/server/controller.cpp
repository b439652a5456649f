#include "usersim/server/controller.hpp"

#include <algorithm>
#include <set>

#include "usersim/core/error.hpp"

namespace usersim {

using nlohmann::json;

// ---- EventBus ----

std::string EventBus::frame_of(const Event& e) {
    json f = {{"seq", e.seq}, {"event", e.to_json()}};
    return f.dump();
}

void EventBus::publish(const Event& e) {
    auto frame = frame_of(e);
    std::lock_guard lock(mu_);
    if (frames_.empty()) base_seq_ = e.seq;
    frames_.push_back(frame);
    for (auto& [token, sink] : sinks_) sink(e.seq, frame);
}

std::uint64_t EventBus::subscribe(std::uint64_t from_seq, Sink sink) {
    std::lock_guard lock(mu_);
    for (std::size_t i = from_seq > base_seq_ ? from_seq - base_seq_ : 0; i < frames_.size(); ++i)
        sink(base_seq_ + i, frames_[i]);
    const auto token = next_token_++;
    sinks_.emplace(token, std::move(sink));
    return token;
}

void EventBus::unsubscribe(std::uint64_t token) {
    std::lock_guard lock(mu_);
    sinks_.erase(token);
}

std::vector<std::string> EventBus::frames(std::uint64_t from_seq) const {
    std::lock_guard lock(mu_);
    const std::size_t start = from_seq > base_seq_ ? from_seq - base_seq_ : 0;
    if (start >= frames_.size()) return {};
    return {frames_.begin() + static_cast<std::ptrdiff_t>(start), frames_.end()};
}

std::uint64_t EventBus::next_seq() const {
    std::lock_guard lock(mu_);
    return base_seq_ + frames_.size();
}

// ---- commands ----

const char* to_string(CommandStatus s) {
    switch (s) {
        case CommandStatus::Queued: return "queued";
        case CommandStatus::Running: return "running";
        case CommandStatus::Applied: return "applied";
        case CommandStatus::Rejected: return "rejected";
    }
    return "unknown";
}

CommandSchemaError::CommandSchemaError(std::vector<FieldError> errors)
    : std::runtime_error("command failed validation"), errors_(std::move(errors)) {}

json CommandSchemaError::to_json() const {
    json fields = json::array();
    for (const auto& e : errors_) fields.push_back({{"field", e.field}, {"message", e.message}});
    return {{"error", "schema"}, {"fields", fields}};
}

json CommandRecord::to_json() const {
    json j = {{"id", id},         {"branch", branch}, {"kind", kind},     {"payload", payload},
              {"status", usersim::to_string(status)}, {"result", result}, {"round", round_applied}};
    if (idempotency_key) j["idempotency_key"] = *idempotency_key;
    if (error) j["error"] = *error;
    return j;
}

const std::vector<std::string>& command_kinds() {
    static const std::vector<std::string> kinds = {"pause",         "resume", "step",       "interview",
                                                   "edit_profile",  "schedule_strategy",    "fork",
                                                   "checkpoint",    "attach_role_play",     "role_play_input"};
    return kinds;
}

// ---- controller ----

struct Controller::Snapshot {
    json state;
    json agents = json::array();
    std::map<std::uint32_t, json> agent;
    std::map<std::string, json> metrics;
};

struct Controller::Branch {
    std::string id;
    std::string parent;
    std::uint64_t fork_round = 0;
    std::unique_ptr<Engine> engine;  // worker thread only, after construction
    EventBus bus;
    std::set<std::uint32_t> agent_ids;
    std::deque<std::string> queue;
    std::deque<std::pair<std::string, std::uint64_t>> steps;  // running step commands, rounds left
    std::vector<std::string> commands;
    bool paused = false;
    bool busy = false;
    std::shared_ptr<const Snapshot> snapshot;
    std::map<std::uint32_t, std::shared_ptr<RolePlaySession>> sessions;

    bool has_work() const { return !queue.empty() || (!steps.empty() && !paused); }
};

Controller::Controller(std::unique_ptr<Engine> engine) {
    if (!engine) throw SimError(ErrorCode::InvalidInput, "controller needs an engine");
    add_branch(std::move(engine), "", 0);
    worker_ = std::thread([this] { worker(); });
}

Controller::~Controller() { stop(); }

void Controller::stop() {
    {
        std::lock_guard lock(mu_);
        if (stopping_ && !worker_.joinable()) return;
        stopping_ = true;
        for (auto& [id, b] : branches_)
            for (auto& [a, s] : b->sessions) s->disconnect();
    }
    cv_.notify_all();
    if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

std::string Controller::add_branch(std::unique_ptr<Engine> engine, std::string parent, std::uint64_t fork_round) {
    auto b = std::make_unique<Branch>();
    b->id = parent.empty() ? "main" : "b" + std::to_string(next_branch_++);
    b->parent = std::move(parent);
    b->fork_round = fork_round;
    for (const auto& e : engine->events()) b->bus.publish(e);
    engine->set_listener([bus = &b->bus](const Event& e) { bus->publish(e); });
    for (const auto& [id, s] : engine->agents()) b->agent_ids.insert(id.value);
    b->paused = engine->paused();
    b->engine = std::move(engine);
    b->snapshot = build_snapshot(*b);
    auto id = b->id;
    branches_.emplace(id, std::move(b));
    return id;
}

Controller::Branch& Controller::branch_locked(const std::string& id) const {
    auto it = branches_.find(id);
    if (it == branches_.end()) throw SimError(ErrorCode::InvalidInput, "unknown branch " + id);
    return *it->second;
}

namespace {

std::optional<std::uint32_t> agent_field(const json& p, std::vector<FieldError>& errors,
                                         const std::set<std::uint32_t>& ids) {
    if (!p.contains("agent")) {
        errors.push_back({"payload.agent", "required"});
        return std::nullopt;
    }
    const auto& a = p["agent"];
    if (!a.is_number_integer() || a.get<std::int64_t>() < 0) {
        errors.push_back({"payload.agent", "must be a non-negative integer agent id"});
        return std::nullopt;
    }
    const auto id = a.get<std::uint32_t>();
    if (!ids.count(id)) {
        errors.push_back({"payload.agent", "no agent with id " + std::to_string(id)});
        return std::nullopt;
    }
    return id;
}

void text_field(const json& p, const char* name, std::vector<FieldError>& errors) {
    const std::string field = std::string("payload.") + name;
    if (!p.contains(name))
        errors.push_back({field, "required"});
    else if (!p[name].is_string() || p[name].get<std::string>().empty())
        errors.push_back({field, "must be a non-empty string"});
}

json error_json(ErrorCode code, const std::string& message) {
    return {{"code", to_string(code)}, {"message", message}};
}

}  // namespace

void Controller::validate(const Branch& b, const std::string& kind, const json& p) const {
    std::vector<FieldError> errors;
    const auto& kinds = command_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        errors.push_back({"kind", "unknown command kind '" + kind + "'"});
        throw CommandSchemaError(std::move(errors));
    }
    if (!p.is_object()) {
        errors.push_back({"payload", "must be an object"});
        throw CommandSchemaError(std::move(errors));
    }
    if (kind == "step") {
        if (p.contains("n") && (!p["n"].is_number_integer() || p["n"].get<std::int64_t>() <= 0))
            errors.push_back({"payload.n", "must be a positive integer"});
    } else if (kind == "interview") {
        agent_field(p, errors, b.agent_ids);
        text_field(p, "question", errors);
    } else if (kind == "edit_profile") {
        agent_field(p, errors, b.agent_ids);
        if (!p.contains("patch") || !p["patch"].is_object()) {
            errors.push_back({"payload.patch", "must be an object"});
        } else {
            try {
                parse_profile_patch(p["patch"]);
            } catch (const SimError& e) {
                errors.push_back({"payload.patch", e.what()});
            }
        }
    } else if (kind == "schedule_strategy") {
        try {
            auto spec = p.get<InterventionSpec>();
            spec.validate();
            for (auto a : spec.agents)
                if (!b.agent_ids.count(a.value)) errors.push_back({"payload.agents", "no agent with id " + a.str()});
        } catch (const std::exception& e) {
            errors.push_back({"payload", e.what()});
        }
    } else if (kind == "attach_role_play") {
        agent_field(p, errors, b.agent_ids);
    } else if (kind == "role_play_input") {
        agent_field(p, errors, b.agent_ids);
        text_field(p, "input", errors);
    }
    if (!errors.empty()) throw CommandSchemaError(std::move(errors));
}

CommandRecord Controller::submit(const std::string& branch, const std::string& kind, json payload,
                                 std::optional<std::string> key) {
    if (payload.is_null()) payload = json::object();
    std::unique_lock lock(mu_);
    if (key) {
        if (auto it = by_key_.find(*key); it != by_key_.end()) return commands_.at(it->second);
    }
    auto& b = branch_locked(branch);
    validate(b, kind, payload);
    CommandRecord rec;
    rec.id = "c" + std::to_string(next_command_++);
    rec.branch = branch;
    rec.kind = kind;
    rec.payload = std::move(payload);
    rec.idempotency_key = key;
    rec.round_applied = b.snapshot->state.value("round", std::uint64_t{0});
    if (key) by_key_[*key] = rec.id;
    b.commands.push_back(rec.id);

    if (kind == "role_play_input") {
        // decisions are taken mid-round, so input goes straight to the session mailbox
        const auto agent = rec.payload["agent"].get<std::uint32_t>();
        auto it = b.sessions.find(agent);
        if (it == b.sessions.end() || !it->second->connected()) {
            rec.status = CommandStatus::Rejected;
            rec.error = error_json(ErrorCode::PreconditionViolation, "agent is not role-played");
        } else if (!it->second->submit(rec.payload["input"].get<std::string>())) {
            rec.status = CommandStatus::Rejected;
            rec.error = error_json(ErrorCode::PreconditionViolation, "no decision is awaiting input");
        } else {
            rec.status = CommandStatus::Applied;
            rec.result = {{"delivered", true}};
        }
        commands_[rec.id] = rec;
        cv_.notify_all();
        return rec;
    }
    b.queue.push_back(rec.id);
    commands_[rec.id] = rec;
    cv_.notify_all();
    return rec;
}

CommandRecord Controller::submit_json(const std::string& branch, const json& body) {
    std::vector<FieldError> errors;
    if (!body.is_object()) throw CommandSchemaError(std::vector<FieldError>{{"", "body must be a JSON object"}});
    if (!body.contains("kind") || !body["kind"].is_string()) errors.push_back({"kind", "required string"});
    if (body.contains("payload") && !body["payload"].is_object() && !body["payload"].is_null())
        errors.push_back({"payload", "must be an object"});
    std::optional<std::string> key;
    if (body.contains("idempotency_key")) {
        if (!body["idempotency_key"].is_string() || body["idempotency_key"].get<std::string>().empty())
            errors.push_back({"idempotency_key", "must be a non-empty string"});
        else
            key = body["idempotency_key"].get<std::string>();
    }
    if (!errors.empty()) throw CommandSchemaError(std::move(errors));
    return submit(branch, body["kind"].get<std::string>(), body.value("payload", json::object()), key);
}

std::optional<CommandRecord> Controller::command(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = commands_.find(id);
    if (it == commands_.end()) return std::nullopt;
    return it->second;
}

std::optional<CommandRecord> Controller::wait(const std::string& id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    auto done = [&] {
        auto it = commands_.find(id);
        return it == commands_.end() || it->second.status == CommandStatus::Applied ||
               it->second.status == CommandStatus::Rejected;
    };
    cv_.wait_for(lock, timeout, done);
    auto it = commands_.find(id);
    if (it == commands_.end()) return std::nullopt;
    return it->second;
}

bool Controller::wait_idle(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] {
        for (const auto& [id, b] : branches_)
            if (b->busy || b->has_work()) return false;
        return true;
    });
}

std::vector<std::string> Controller::branch_ids() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, b] : branches_) out.push_back(id);
    return out;
}

bool Controller::has_branch(const std::string& branch) const {
    std::lock_guard lock(mu_);
    return branches_.count(branch) > 0;
}

json Controller::branches_json() const {
    std::lock_guard lock(mu_);
    json out = json::array();
    for (const auto& [id, b] : branches_) {
        json j = {{"id", id},
                  {"fork_round", b->fork_round},
                  {"round", b->snapshot->state.value("round", std::uint64_t{0})},
                  {"paused", b->paused},
                  {"commands", b->commands}};
        j["parent"] = b->parent.empty() ? json(nullptr) : json(b->parent);
        out.push_back(std::move(j));
    }
    return out;
}

json Controller::state(const std::string& branch) const {
    std::lock_guard lock(mu_);
    const auto& b = branch_locked(branch);
    auto s = b.snapshot->state;
    std::uint64_t pending = 0;
    for (const auto& [id, left] : b.steps) pending += left;
    s["pending_rounds"] = pending;
    s["in_round"] = b.busy && !b.steps.empty();
    s["queued_commands"] = b.queue.size();
    s["next_seq"] = b.bus.next_seq();
    return s;
}

json Controller::agents(const std::string& branch) const {
    std::lock_guard lock(mu_);
    return branch_locked(branch).snapshot->agents;
}

json Controller::agent(const std::string& branch, std::uint32_t id) const {
    std::lock_guard lock(mu_);
    const auto& snap = *branch_locked(branch).snapshot;
    auto it = snap.agent.find(id);
    if (it == snap.agent.end()) throw SimError(ErrorCode::InvalidInput, "no agent with id " + std::to_string(id));
    return it->second;
}

std::optional<json> Controller::metric(const std::string& branch, const std::string& name) const {
    std::lock_guard lock(mu_);
    const auto& snap = *branch_locked(branch).snapshot;
    auto it = snap.metrics.find(name);
    if (it == snap.metrics.end()) return std::nullopt;
    return it->second;
}

EventBus& Controller::bus(const std::string& branch) {
    std::lock_guard lock(mu_);
    return branch_locked(branch).bus;
}

std::shared_ptr<RolePlaySession> Controller::role_play_session(const std::string& branch, std::uint32_t agent) const {
    std::lock_guard lock(mu_);
    const auto& b = branch_locked(branch);
    auto it = b.sessions.find(agent);
    return it == b.sessions.end() ? nullptr : it->second;
}

// ---- worker ----

void Controller::worker() {
    std::unique_lock lock(mu_);
    std::string last;  // branch served last, for round-robin
    while (true) {
        cv_.wait(lock, [&] {
            if (stopping_) return true;
            for (const auto& [id, b] : branches_)
                if (b->has_work()) return true;
            return false;
        });
        if (stopping_) return;
        Branch* next = nullptr;
        for (auto it = branches_.upper_bound(last); it != branches_.end() && !next; ++it)
            if (it->second->has_work()) next = it->second.get();
        for (auto it = branches_.begin(); it != branches_.end() && !next; ++it)
            if (it->second->has_work()) next = it->second.get();
        last = next->id;
        next->busy = true;
        lock.unlock();
        const bool ran = step_branch(*next);
        lock.lock();
        next->busy = false;
        if (ran) cv_.notify_all();
    }
}

bool Controller::step_branch(Branch& b) {
    std::optional<CommandRecord> rec;
    {
        std::lock_guard lock(mu_);
        if (!b.queue.empty()) {
            auto& r = commands_.at(b.queue.front());
            b.queue.pop_front();
            r.status = CommandStatus::Running;
            rec = r;
        }
    }
    if (rec) {
        apply(b, *rec);
        return true;
    }
    // no queued command: run one round of the oldest step
    std::optional<json> error;
    try {
        b.engine->run_round();
    } catch (const SimError& e) {
        error = error_json(e.code(), e.what());
    } catch (const std::exception& e) {
        error = json{{"code", "Internal"}, {"message", e.what()}};
    }
    refresh_snapshot(b);
    std::lock_guard lock(mu_);
    auto& [id, left] = b.steps.front();
    auto& r = commands_.at(id);
    r.round_applied = b.engine->round();
    if (error) {
        r.status = CommandStatus::Rejected;
        r.error = *error;
        b.steps.pop_front();
    } else if (--left == 0) {
        r.status = CommandStatus::Applied;
        r.result = {{"rounds", r.payload.value("n", std::uint64_t{1})}, {"round", b.engine->round()}};
        b.steps.pop_front();
    }
    return true;
}

void Controller::finish(const std::string& id, CommandStatus status, json result, std::optional<json> error,
                        std::uint64_t round) {
    auto& r = commands_.at(id);
    r.status = status;
    r.result = std::move(result);
    r.error = std::move(error);
    r.round_applied = round;
}

void Controller::apply(Branch& b, CommandRecord& rec) {
    Engine& engine = *b.engine;
    const auto& p = rec.payload;
    json result = json::object();
    std::optional<json> error;
    std::unique_ptr<Engine> forked;
    std::shared_ptr<RolePlaySession> session;
    bool running = false;
    try {
        if (rec.kind == "pause") {
            engine.pause();
            result = {{"paused", true}};
        } else if (rec.kind == "resume") {
            engine.resume();
            result = {{"paused", false}};
        } else if (rec.kind == "step") {
            if (engine.paused()) throw SimError(ErrorCode::PreconditionViolation, "simulation is paused");
            running = true;
        } else if (rec.kind == "interview") {
            result = {{"answer", engine.interview(AgentId{p["agent"].get<std::uint32_t>()},
                                                  p["question"].get<std::string>())}};
        } else if (rec.kind == "edit_profile") {
            const AgentId id{p["agent"].get<std::uint32_t>()};
            engine.edit_profile(id, parse_profile_patch(p["patch"]));
            result = {{"version", engine.agent(id).profile.version}};
        } else if (rec.kind == "schedule_strategy") {
            engine.schedule(p.get<InterventionSpec>());
            result = {{"scheduled", true}};
        } else if (rec.kind == "fork") {
            if (engine.in_round()) throw SimError(ErrorCode::PreconditionViolation, "cannot fork mid-round");
            forked = std::move(engine.fork().second);
        } else if (rec.kind == "checkpoint") {
            const auto bytes = engine.checkpoint();
            result = {{"checkpoint", bytes}, {"size", bytes.size()}};
        } else if (rec.kind == "attach_role_play") {
            const AgentId id{p["agent"].get<std::uint32_t>()};
            session = std::make_shared<RolePlaySession>(
                id, std::chrono::milliseconds(engine.config().role_play_timeout_ms));
            engine.attach_role_play(session);
            result = {{"agent", id.value}, {"timeout_ms", engine.config().role_play_timeout_ms}};
        }
    } catch (const SimError& e) {
        error = error_json(e.code(), e.what());
    } catch (const std::exception& e) {
        error = json{{"code", "Internal"}, {"message", e.what()}};
    }
    if (!running) refresh_snapshot(b);
    std::lock_guard lock(mu_);
    b.paused = engine.paused();
    if (error) {
        finish(rec.id, CommandStatus::Rejected, json::object(), error, engine.round());
        return;
    }
    if (running) {
        b.steps.emplace_back(rec.id, p.value("n", std::uint64_t{1}));
        return;
    }
    if (forked) result = {{"branch", add_branch(std::move(forked), b.id, engine.round())}, {"round", engine.round()}};
    if (session) b.sessions[session->agent().value] = session;
    finish(rec.id, CommandStatus::Applied, std::move(result), std::nullopt, engine.round());
}

void Controller::refresh_snapshot(Branch& b) {
    auto snap = build_snapshot(b);
    std::lock_guard lock(mu_);
    b.snapshot = std::move(snap);
}

std::shared_ptr<const Controller::Snapshot> Controller::build_snapshot(const Branch& b) {
    const Engine& e = *b.engine;
    auto snap = std::make_shared<Snapshot>();
    std::set<std::uint32_t> active;
    const auto last_round = e.round() == 0 ? 0 : e.round() - 1;
    for (auto it = e.events().rbegin(); it != e.events().rend() && it->round >= last_round; ++it)
        if (it->kind == "active" && it->agent && it->round == last_round) active.insert(it->agent->value);
    json stats = nullptr;
    if (!e.round_stats().empty()) {
        const auto& s = e.round_stats().back();
        stats = {{"round", s.round},     {"entropy", s.entropy}, {"entropy_cumulative", s.entropy_cumulative},
                 {"active", s.active},   {"buys", s.buys},       {"searches", s.searches},
                 {"chats", s.chats},     {"posts", s.posts},     {"failures", s.failures}};
    }
    snap->state = {{"branch", b.id},
                   {"round", e.round()},
                   {"time", e.clock().iso_minutes()},
                   {"paused", e.paused()},
                   {"num_agents", e.agents().size()},
                   {"seed", e.config().seed},
                   {"backend", e.config().llm.backend},
                   {"last_round", stats}};
    for (const auto& [id, s] : e.agents()) {
        const auto& pr = s.profile;
        json features = json::array();
        json profile;
        to_json(profile, pr);
        if (profile.contains("features")) features = profile["features"];
        const bool role_played = [&] {
            auto rp = e.role_play(id);
            return rp && rp->connected();
        }();
        snap->agents.push_back({{"id", id.value},
                                {"name", pr.name},
                                {"interests", pr.interests},
                                {"features", features},
                                {"activity_level", pr.activity_level},
                                {"active_last_round", active.count(id.value) > 0},
                                {"role_played", role_played}});
        json st = json::array(), lt = json::array();
        auto record = [](const MemoryRecord& r) {
            json j = r;
            j.erase("embedding");
            return j;
        };
        for (const auto& r : s.memory.short_term) st.push_back(record(r));
        for (const auto& r : s.memory.long_term) lt.push_back(record(r));
        json friends = json::array();
        for (auto f : e.graph().friends(id)) friends.push_back(f.value);
        snap->agent[id.value] = {{"id", id.value},
                                 {"profile", profile},
                                 {"memory", {{"short_term", st}, {"long_term", lt}}},
                                 {"heard", s.heard},
                                 {"watched", s.watched},
                                 {"last_page", s.last_page},
                                 {"friends", friends},
                                 {"role_played", role_played}};
    }
    for (const auto& name : Engine::metric_names()) {
        json pts = json::array();
        for (const auto& pt : e.metric_series(name)) pts.push_back({{"round", pt.round}, {"value", pt.value}});
        snap->metrics[name] = {{"name", name}, {"points", pts}};
    }
    return snap;
}

}  // namespace usersim
