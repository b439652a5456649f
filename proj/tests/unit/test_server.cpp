#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <thread>

#include "usersim/core/error.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/server/controller.hpp"
#include "usersim/server/http_server.hpp"

using namespace usersim;
using nlohmann::json;
using namespace std::chrono_literals;

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

SimulationConfig small_config() {
    SimulationConfig c;
    c.seed = 9;
    c.num_agents = 6;
    c.activity.a_ref = 2.0;
    c.role_play_timeout_ms = 5000;
    return c;
}

std::shared_ptr<Controller> make_controller(const SimulationConfig& c = small_config()) {
    return std::make_shared<Controller>(build_engine(c));
}

CommandRecord run_cmd(Controller& c, const std::string& kind, json payload = json::object(),
                      const std::string& branch = "main") {
    auto rec = c.submit(branch, kind, std::move(payload));
    auto done = c.wait(rec.id, 60s);
    REQUIRE(done.has_value());
    return *done;
}

/// Event lines of a frame list, for comparison against Engine::event_log().
std::string log_of(const std::vector<std::string>& frames) {
    std::string out;
    for (const auto& f : frames) out += json::parse(f)["event"].dump() + "\n";
    return out;
}

std::pair<unsigned, json> http_call(std::uint16_t port, http::verb verb, const std::string& target,
                                    const std::string& body = {}) {
    net::io_context ioc;
    tcp::resolver resolver(ioc);
    beast::tcp_stream stream(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    if (!body.empty()) {
        req.set(http::field::content_type, "application/json");
        req.body() = body;
    }
    req.prepare_payload();
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response<http::string_body> res;
    http::read(stream, buf, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return {res.result_int(), res.body().empty() ? json() : json::parse(res.body())};
}

struct WsClient {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    WsClient(std::uint16_t port, const std::string& target) {
        tcp::resolver resolver(ioc);
        net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", target);
    }
    json read() {
        beast::flat_buffer buf;
        ws.read(buf);
        return json::parse(beast::buffers_to_string(buf.data()));
    }
    void write(const std::string& text) { ws.write(net::buffer(text)); }
    void close() {
        beast::error_code ec;
        ws.close(websocket::close_code::normal, ec);
    }
};

}  // namespace

TEST_CASE("event bus replays then streams without gaps or repeats") {
    EventBus bus;
    auto ev = [](std::uint64_t seq) {
        Event e;
        e.seq = seq;
        e.kind = "round_start";
        return e;
    };
    for (std::uint64_t i = 0; i < 5; ++i) bus.publish(ev(i));
    std::vector<std::uint64_t> got;
    std::mutex mu;
    std::atomic<bool> stop{false};
    std::thread producer([&] {
        for (std::uint64_t i = 5; i < 500; ++i) bus.publish(ev(i));
        stop = true;
    });
    const auto token = bus.subscribe(2, [&](std::uint64_t seq, const std::string& frame) {
        std::lock_guard lock(mu);
        CHECK(json::parse(frame)["seq"] == seq);
        got.push_back(seq);
    });
    producer.join();
    bus.unsubscribe(token);
    bus.publish(ev(500));
    REQUIRE(got.size() == 498);
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == i + 2);
    CHECK(bus.next_seq() == 501);
    CHECK(bus.frames(499).size() == 2);
}

TEST_CASE("commands apply in submission order") {
    auto c = make_controller();
    std::vector<std::string> ids;
    ids.push_back(c->submit("main", "pause", {}).id);
    ids.push_back(c->submit("main", "edit_profile", {{"agent", 1}, {"patch", {{"age", 50}}}}).id);
    ids.push_back(c->submit("main", "resume", {}).id);
    ids.push_back(c->submit("main", "step", {{"n", 2}}).id);
    ids.push_back(c->submit("main", "edit_profile", {{"agent", 1}, {"patch", {{"age", 51}}}}).id);
    REQUIRE(c->wait_idle(60s));
    for (std::size_t i = 0; i < 4; ++i) CHECK(c->command(ids[i])->status == CommandStatus::Applied);
    // editing while running is refused
    const auto late = *c->command(ids[4]);
    CHECK(late.status == CommandStatus::Rejected);
    CHECK((*late.error)["code"] == "PreconditionViolation");
    CHECK(c->agent("main", 1)["profile"]["age"] == 50);
    CHECK(c->state("main")["round"] == 2);
    // events show the edit before the first round
    const auto frames = c->bus("main").frames();
    std::size_t edit = 0, first_round = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto kind = json::parse(frames[i])["event"]["kind"];
        if (kind == "edit_profile") edit = i;
        if (kind == "round_start" && !first_round) first_round = i;
    }
    CHECK(edit < first_round);
}

TEST_CASE("idempotency keys collapse repeated submissions") {
    auto c = make_controller();
    const auto a = c->submit("main", "step", {{"n", 1}}, "k1");
    const auto b = c->submit("main", "step", {{"n", 1}}, "k1");
    CHECK(a.id == b.id);
    REQUIRE(c->wait_idle(60s));
    CHECK(c->state("main")["round"] == 1);
}

TEST_CASE("malformed commands are rejected with field errors") {
    auto c = make_controller();
    auto fields = [&](const json& body) {
        try {
            c->submit_json("main", body);
        } catch (const CommandSchemaError& e) {
            std::vector<std::string> out;
            for (const auto& f : e.errors()) out.push_back(f.field);
            return out;
        }
        FAIL("expected schema error");
        return std::vector<std::string>{};
    };
    CHECK(fields({{"kind", "teleport"}}) == std::vector<std::string>{"kind"});
    CHECK(fields({{"payload", {}}}) == std::vector<std::string>{"kind"});
    CHECK(fields({{"kind", "step"}, {"payload", {{"n", 0}}}}) == std::vector<std::string>{"payload.n"});
    CHECK(fields({{"kind", "interview"}, {"payload", {{"agent", 999}}}}).size() == 2);
    CHECK(fields({{"kind", "edit_profile"}, {"payload", {{"agent", 1}, {"patch", {{"mood", "x"}}}}}}) ==
          std::vector<std::string>{"payload.patch"});
    CHECK(fields({{"kind", "schedule_strategy"}, {"payload", {{"strategy", "nope"}}}}) ==
          std::vector<std::string>{"payload"});
    CHECK(fields({{"kind", "step"}, {"idempotency_key", ""}}) == std::vector<std::string>{"idempotency_key"});
    CHECK_THROWS_AS(c->submit("elsewhere", "step", {}), SimError);
    CHECK(c->state("main")["queued_commands"] == 0);
}

TEST_CASE("the bus mirrors the engine log and forks start as exact copies") {
    const auto cfg = small_config();
    auto c = make_controller(cfg);
    run_cmd(*c, "step", {{"n", 2}});
    auto reference = build_engine(cfg);
    reference->run(2);
    CHECK(log_of(c->bus("main").frames()) == reference->event_log());

    const auto fork = run_cmd(*c, "fork");
    REQUIRE(fork.status == CommandStatus::Applied);
    const std::string child = fork.result["branch"];
    CHECK(c->has_branch(child));
    run_cmd(*c, "step", {{"n", 1}});
    run_cmd(*c, "step", {{"n", 1}}, child);
    CHECK(log_of(c->bus(child).frames()) == log_of(c->bus("main").frames()));
    CHECK(c->branches_json().size() == 2);

    const auto cp = run_cmd(*c, "checkpoint", {}, child);
    auto restored = Engine::load(cp.result["checkpoint"].get<std::string>(), make_port(cfg, reference->catalog_ptr()));
    CHECK(restored->event_log() == log_of(c->bus(child).frames()));
}

TEST_CASE("interview answers without changing the agent") {
    auto c = make_controller();
    run_cmd(*c, "step", {{"n", 1}});
    const auto before = c->agent("main", 2);
    const auto r = run_cmd(*c, "interview", {{"agent", 2}, {"question", "Which genres do you like?"}});
    CHECK(r.status == CommandStatus::Applied);
    CHECK_FALSE(r.result["answer"].get<std::string>().empty());
    CHECK(c->agent("main", 2) == before);
}

TEST_CASE("route_api serves reads and command posts") {
    auto c = make_controller();
    auto get = [&](const std::string& t) { return route_api(*c, "GET", t, ""); };
    CHECK(get("/state").status == 200);
    CHECK(json::parse(get("/agents").body).size() == 6);
    CHECK(get("/agents/3").status == 200);
    CHECK(get("/agents/99").status == 404);
    CHECK(get("/agents/x").status == 400);
    CHECK(get("/state?branch=ghost").status == 404);
    CHECK(get("/nowhere").status == 404);
    CHECK(route_api(*c, "DELETE", "/state", "").status == 405);

    const auto post = route_api(*c, "POST", "/commands?wait_ms=60000", R"({"kind":"step","payload":{"n":1}})");
    CHECK(post.status == 200);
    const auto rec = json::parse(post.body);
    CHECK(rec["status"] == "applied");
    CHECK(get("/commands/" + rec["id"].get<std::string>()).status == 200);
    CHECK(route_api(*c, "POST", "/commands", "{oops").status == 400);
    const auto bad = route_api(*c, "POST", "/commands", R"({"kind":"step","payload":{"n":-1}})");
    CHECK(bad.status == 400);
    CHECK(json::parse(bad.body)["fields"][0]["field"] == "payload.n");
    CHECK(route_api(*c, "POST", "/branches/ghost/commands", R"({"kind":"step"})").status == 404);

    const auto metric = get("/metrics/entropy");
    CHECK(metric.status == 200);
    CHECK(json::parse(metric.body)["points"].size() == 1);
    CHECK(get("/metrics/nope").status == 404);
    const auto events = json::parse(get("/events?from_seq=3").body);
    CHECK(events[0]["seq"] == 3);
    CHECK(parse_query("a=1&b=x%20y&c") == std::map<std::string, std::string>{{"a", "1"}, {"b", "x y"}, {"c", ""}});
}

TEST_CASE("http and websocket endpoints over a socket") {
    auto c = make_controller();
    HttpServer server(c, "127.0.0.1", 0);
    server.start();
    const auto port = server.port();
    REQUIRE(port != 0);

    auto [status, body] = http_call(port, http::verb::post, "/commands?wait_ms=60000", R"({"kind":"step","payload":{"n":2}})");
    CHECK(status == 200);
    CHECK(body["status"] == "applied");
    auto [s2, state] = http_call(port, http::verb::get, "/state");
    CHECK(s2 == 200);
    CHECK(state["round"] == 2);

    SUBCASE("stream replays from an offset and reconnects without gaps") {
        const auto all = c->bus("main").frames();
        const std::uint64_t from = 10;
        std::vector<json> got;
        {
            WsClient ws(port, "/stream?from_seq=" + std::to_string(from));
            for (std::size_t i = 0; i < 20; ++i) got.push_back(ws.read());
            ws.close();
        }
        // resume from the next offset while new rounds are produced
        c->submit("main", "step", {{"n", 1}});
        {
            WsClient ws(port, "/stream?from_seq=" + std::to_string(from + got.size()));
            REQUIRE(c->wait_idle(60s));
            const auto total = c->bus("main").next_seq();
            while (from + got.size() < total) got.push_back(ws.read());
            ws.close();
        }
        const auto frames = c->bus("main").frames(from);
        REQUIRE(got.size() == frames.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i]["seq"] == from + i);
            CHECK(got[i] == json::parse(frames[i]));
        }
        CHECK(all.size() < c->bus("main").frames().size());
    }

    SUBCASE("roleplay socket relays decisions and answers") {
        auto cfg_agent = 3;
        WsClient ws(port, "/roleplay/" + std::to_string(cfg_agent));
        const auto attached = ws.read();
        REQUIRE(attached["type"] == "attached");
        // agent 3 must be active for a decision; run rounds until one arrives
        std::thread stepper([&] { c->submit("main", "step", {{"n", 8}}); });
        stepper.join();
        std::size_t answered = 0;
        while (answered < 3) {
            const auto msg = ws.read();
            if (msg["type"] == "ack") {
                CHECK(msg["command"]["status"] == "applied");
                continue;
            }
            REQUIRE(msg["type"] == "decision");
            CHECK(msg["agent"] == cfg_agent);
            const std::string kind = msg["kind"];
            if (kind == "top_action")
                ws.write(R"({"input":"[NOTHING]:: resting"})");
            else
                ws.write("I'd rather not say.");
            ++answered;
        }
        ws.close();
        REQUIRE(c->wait_idle(120s));
        bool saw_human = false;
        for (const auto& f : c->bus("main").frames()) {
            const auto e = json::parse(f)["event"];
            if (e["kind"] == "top_action" && e["agent"] == cfg_agent && e["payload"]["defaulted"] == false &&
                e["payload"]["action"].get<std::string>().rfind("[NOTHING]", 0) == 0)
                saw_human = true;
        }
        CHECK(saw_human);
        CHECK(c->state("main")["round"] == 10);
    }
    server.stop();
}
