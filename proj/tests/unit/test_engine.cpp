#include <doctest.h>

#include <atomic>
#include <thread>

#include "usersim/core/error.hpp"
#include "usersim/engine/checkpoint.hpp"
#include "usersim/engine/config.hpp"
#include "usersim/engine/engine.hpp"
#include "usersim/experiments/fixtures.hpp"

using namespace usersim;
using nlohmann::json;

namespace {

SimulationConfig small_config(std::uint64_t seed = 5) {
    SimulationConfig c;
    c.seed = seed;
    c.num_agents = 8;
    c.activity.a_ref = 2.0;  // most agents act every round
    return c;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("expected SimError");
    return ErrorCode::InvalidInput;
}

std::size_t count_kind(const Engine& e, const std::string& kind) {
    std::size_t n = 0;
    for (const auto& ev : e.events()) n += ev.kind == kind;
    return n;
}

}  // namespace

TEST_CASE("toml config parses every section") {
    const auto c = parse_config_toml(R"(
[sim]
seed = 7
num_agents = 12
rounds = 4
start_time = "2023-01-02 09:30"
round_minutes = 30

[llm]
backend = "mock"
embed_dim = 64

[memory]
similarity_threshold = 0.8
promotion_count = 4

[recsys]
algorithm = "random"
page_size = 4

[activity]
alpha = 3.0

[[interventions]]
strategy = "rec"
start_round = 2
n = 3
agents = [1, 2]
)");
    CHECK(c.seed == 7);
    CHECK(c.num_agents == 12);
    CHECK(c.round_minutes == 30);
    CHECK(c.llm.embed_dim == 64);
    CHECK(c.memory.similarity_threshold == 0.8);
    CHECK(c.memory.promotion_count == 4);
    CHECK(c.recsys.algorithm == "random");
    CHECK(c.activity.alpha == 3.0);
    REQUIRE(c.interventions.size() == 1);
    CHECK(c.interventions[0].agents == std::vector<AgentId>{AgentId{1}, AgentId{2}});

    json j = c;
    CHECK(j.get<SimulationConfig>() == c);
}

TEST_CASE("invalid configs are rejected") {
    CHECK(code_of([] { parse_config_toml("[sim]\nnum_agents = 3\n"); }) == ErrorCode::ConfigInvalid);  // no seed
    CHECK(code_of([] { parse_config_toml("[sim]\nseed = 1\n[memory]\nbeta = -1.0\n"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { parse_config_toml("[sim\nseed = 1"); }) == ErrorCode::ConfigInvalid);
    CHECK(code_of([] { parse_config_toml("[sim]\nseed = 1\n[[interventions]]\nstrategy = \"magic\"\n"); }) ==
          ErrorCode::ConfigInvalid);
    CHECK_NOTHROW(parse_config_toml("[sim]\ndeterminism = false\n"));
}

TEST_CASE("identical inputs give byte-identical logs") {
    auto a = build_engine(small_config());
    auto b = build_engine(small_config());
    a->run(3);
    b->run(3);
    CHECK(a->event_log() == b->event_log());
    CHECK(count_kind(*a, "round_end") == 3);
    auto c = build_engine(small_config(6));
    c->run(3);
    CHECK(c->event_log() != a->event_log());
}

TEST_CASE("event sequence numbers are gap-free and lines round trip") {
    auto e = build_engine(small_config());
    e->run(2);
    std::uint64_t seq = 0;
    for (const auto& ev : e->events()) {
        CHECK(ev.seq == seq++);
        CHECK(Event::from_json(json::parse(ev.to_line())) == ev);
    }
}

TEST_CASE("a checkpoint resumes exactly where the run left off") {
    auto straight = build_engine(small_config());
    straight->run(5);

    auto first = build_engine(small_config());
    first->run(2);
    const auto bytes = first->checkpoint();
    auto resumed = Engine::load(bytes, make_port(first->config(), first->catalog_ptr()));
    CHECK(resumed->round() == 2);
    CHECK(resumed->checkpoint() == bytes);
    resumed->run(3);
    CHECK(resumed->event_log() == straight->event_log());
    CHECK(resumed->agents() == straight->agents());
}

TEST_CASE("damaged checkpoints fail to load with LoadFailed") {
    auto e = build_engine(small_config());
    e->run(1);
    const auto bytes = e->checkpoint();
    auto port = make_port(e->config(), e->catalog_ptr());
    CHECK(code_of([&] { Engine::load(bytes.substr(0, bytes.size() / 2), port); }) == ErrorCode::LoadFailed);

    auto j = json::parse(bytes);
    j["schema_version"] = kCheckpointSchemaVersion + 1;
    CHECK(code_of([&] { Engine::load(j.dump(), port); }) == ErrorCode::LoadFailed);

    j = json::parse(bytes);
    j["state"]["clock"] = "tampered";
    CHECK(code_of([&] { Engine::load(j.dump(), port); }) == ErrorCode::LoadFailed);
    CHECK(code_of([&] { unwrap_checkpoint("not json"); }) == ErrorCode::LoadFailed);
}

TEST_CASE("forks continue identically without commands") {
    auto e = build_engine(small_config());
    e->run(2);
    auto [a, b] = e->fork();
    a->run(2);
    b->run(2);
    CHECK(a->event_log() == b->event_log());
    e->run(2);
    CHECK(e->event_log() == a->event_log());

    auto [c, d] = a->fork();
    c->run(1);
    d->run(1);
    CHECK(c->event_log() == d->event_log());
}

TEST_CASE("a forked branch diverges only after a command") {
    auto e = build_engine(small_config());
    e->run(1);
    auto [a, b] = e->fork();
    b->schedule({"rec", b->round(), 1, 5, {}});
    a->run(2);
    b->run(2);
    CHECK(a->event_log() != b->event_log());
    // the shared prefix is untouched
    const auto prefix = e->event_log();
    CHECK(a->event_log().compare(0, prefix.size(), prefix) == 0);
    CHECK(b->event_log().compare(0, prefix.size(), prefix) == 0);
}

TEST_CASE("profile edits require a pause and bump the version") {
    auto e = build_engine(small_config());
    const AgentId id{1};
    const auto patch = parse_profile_patch({{"age", 77}});
    CHECK(code_of([&] { e->edit_profile(id, patch); }) == ErrorCode::PreconditionViolation);
    CHECK(code_of([&] { e->edit_profile(AgentId{1}, parse_profile_patch({{"interests", {"Knitting"}}})); }) ==
          ErrorCode::PreconditionViolation);
    e->pause();
    CHECK(code_of([&] { e->run_round(); }) == ErrorCode::PreconditionViolation);
    const auto v = e->agent(id).profile.version;
    e->edit_profile(id, patch);
    CHECK(e->agent(id).profile.age == 77);
    CHECK(e->agent(id).profile.version == v + 1);
    const auto before = e->agent(id).profile;
    CHECK(code_of([&] { e->edit_profile(id, parse_profile_patch({{"interests", {"Knitting"}}})); }) ==
          ErrorCode::InvalidPatch);
    CHECK(e->agent(id).profile == before);
    e->resume();
    CHECK_NOTHROW(e->run_round());
    CHECK(count_kind(*e, "edit_profile") == 1);
}

TEST_CASE("interviews leave agent state untouched") {
    auto e = build_engine(small_config());
    e->run(2);
    const auto agents = e->agents();
    const auto summaries = e->summaries().to_json();
    const auto answer = e->interview(AgentId{2}, "What movies have you enjoyed lately?");
    CHECK_FALSE(answer.empty());
    CHECK(e->agents() == agents);
    CHECK(e->summaries().to_json() == summaries);
    CHECK(code_of([&] { e->interview(AgentId{2}, " "); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { e->interview(AgentId{999}, "hi"); }) != ErrorCode::InterviewFailed);
}

TEST_CASE("scheduled rec strategy randomizes n slots from its start round") {
    auto e = build_engine(small_config());
    e->schedule({"rec", 2, 1, 3, {}});
    e->run(4);
    std::size_t before = 0, after = 0;
    for (const auto& ev : e->events()) {
        if (ev.kind != "rec_page") continue;
        const auto n = ev.payload["randomized"].size();
        if (ev.round < 2) {
            CHECK(n == 0);
            ++before;
        } else {
            CHECK(n == std::min<std::size_t>(3, ev.payload["items"].size()));
            ++after;
        }
    }
    CHECK(before > 0);
    CHECK(after > 0);
}

TEST_CASE("soc strategy adds dissimilar friends once") {
    auto e = build_engine(small_config());
    const auto edges = e->graph().edge_count();
    e->schedule({"soc", 1, 1, 1, {AgentId{3}}});
    e->run(3);
    CHECK(count_kind(*e, "intervention") == 1);
    CHECK(e->graph().edge_count() == edges + 1);
    CHECK(e->graph().well_formed());
}

TEST_CASE("every interaction follows a buy decision by the same agent") {
    auto e = build_engine(small_config());
    e->run(5);
    std::map<std::uint32_t, std::string> last_action;
    std::size_t interactions = 0, buys = 0;
    for (const auto& ev : e->events()) {
        if (ev.kind == "rec_action") {
            last_action[ev.agent->value] = ev.payload["action"].get<std::string>();
            if (last_action[ev.agent->value].rfind("[BUY]", 0) == 0) ++buys;
        }
        if (ev.kind == "interaction") {
            ++interactions;
            REQUIRE(ev.agent.has_value());
            CHECK(last_action[ev.agent->value].rfind("[BUY]", 0) == 0);
            CHECK(e->catalog().find(ev.payload["item"].get<std::string>()) != nullptr);
        }
    }
    CHECK(interactions > 0);
    CHECK(interactions == buys);
    CHECK(interactions == e->interactions().size());
    std::size_t stat_buys = 0;
    for (const auto& s : e->round_stats()) stat_buys += s.buys;
    CHECK(stat_buys == interactions);
}

TEST_CASE("a role-played agent buys what the human picks") {
    auto cfg = small_config();
    cfg.activity.a_ref = 0.5;  // everyone active
    auto e = build_engine(cfg);
    const AgentId me{4};
    auto session = std::make_shared<RolePlaySession>(me, std::chrono::milliseconds(5000));
    e->attach_role_play(session);
    std::atomic<bool> done{false};
    std::string picked;
    std::vector<DecisionKind> kinds;
    std::thread human([&] {
        while (!done) {
            auto req = session->pending();
            if (!req) {
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
                continue;
            }
            kinds.push_back(req->kind);
            if (req->kind == DecisionKind::TopAction) {
                session->submit("[RECOMMENDER]:: I'll browse");
            } else if (req->kind == DecisionKind::RecommenderAction) {
                picked = req->context["page"].back()["title"].get<std::string>();
                session->submit("[BUY]:: <" + picked + ">");
            } else {
                session->submit("It was fine.");
            }
        }
    });
    e->run_round();
    done = true;
    human.join();
    CHECK(kinds == std::vector<DecisionKind>{DecisionKind::TopAction, DecisionKind::RecommenderAction,
                                             DecisionKind::Feeling});
    REQUIRE_FALSE(e->agent(me).watched.empty());
    CHECK(e->agent(me).watched.back() == picked);
    bool found = false;
    for (const auto& i : e->interactions())
        if (i.user == me) found = e->catalog().find(i.item)->title == picked;
    CHECK(found);
}

TEST_CASE("an unanswered role-play decision times out to the safe default") {
    auto cfg = small_config();
    cfg.activity.a_ref = 0.5;
    auto e = build_engine(cfg);
    const AgentId me{2};
    e->attach_role_play(std::make_shared<RolePlaySession>(me, std::chrono::milliseconds(20)));
    e->run_round();
    bool checked = false;
    for (const auto& ev : e->events()) {
        if (ev.kind != "top_action" || ev.agent != me) continue;
        CHECK(ev.payload["defaulted"] == true);
        CHECK(ev.payload["action"].get<std::string>().rfind("[NOTHING]", 0) == 0);
        checked = true;
    }
    CHECK(checked);
    // a second session for the same agent is refused while the first is connected
    CHECK(code_of([&] { e->attach_role_play(std::make_shared<RolePlaySession>(me, std::chrono::milliseconds(5))); }) ==
          ErrorCode::PreconditionViolation);
}

TEST_CASE("metric series follow the round stats") {
    auto e = build_engine(small_config());
    e->run(3);
    for (const auto& name : Engine::metric_names()) CHECK(e->metric_series(name).size() == 3);
    CHECK(e->metric_series("nope").empty());
    const auto buys = e->metric_series("buys");
    for (std::size_t r = 0; r < 3; ++r) CHECK(buys[r].value == static_cast<double>(e->round_stats()[r].buys));
}

TEST_CASE("engine agents act in ascending id order within a round") {
    auto e = build_engine(small_config());
    e->run(2);
    std::uint64_t round = 0;
    std::uint32_t last = 0;
    for (const auto& ev : e->events()) {
        if (ev.kind != "active") continue;
        if (ev.round != round) {
            round = ev.round;
            last = 0;
        }
        CHECK(ev.agent->value > last);
        last = ev.agent->value;
    }
}

TEST_CASE("shipped configs load and run") {
    for (const char* name : {"default", "cocoon", "conformity", "rec_intervention"}) {
        INFO(name);
        auto cfg = load_config_file(std::string(USERSIM_SOURCE_DIR) + "/configs/" + name + ".toml");
        CHECK(cfg.seed == 42);
        cfg.num_agents = 5;
        auto e = build_engine(cfg);
        CHECK(e->catalog().size() == 80);
        CHECK_NOTHROW(e->run(1));
    }
}
