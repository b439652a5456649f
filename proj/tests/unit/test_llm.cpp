#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "usersim/agent/action.hpp"
#include "usersim/agent/prompt.hpp"
#include "usersim/core/error.hpp"
#include "usersim/llm/embedder.hpp"
#include "usersim/llm/key_pool.hpp"
#include "usersim/llm/mock_backend.hpp"
#include "usersim/llm/prompt_kind.hpp"
#include "usersim/llm/remote_backend.hpp"
#include "usersim/memory/memory.hpp"

using namespace usersim;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const SimError& e) {
        return e.code();
    }
    FAIL("expected SimError");
    return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("prompt family detection uses the last marker") {
    CHECK(detect_prompt_kind(take_action_instruction("Ann")) == PromptKind::TakeAction);
    CHECK(detect_prompt_kind(post_instruction("Ann")) == PromptKind::Post);
    CHECK(detect_prompt_kind(compression_prompt("Ann watched a film.")) == PromptKind::Compress);
    // memory text quoting an older instruction must not win over the real one
    const std::string quoted = "Earlier: " + std::string(markers::kPost) + "\n" + take_action_instruction("Ann");
    CHECK(detect_prompt_kind(quoted) == PromptKind::TakeAction);
    CHECK(detect_prompt_kind("hello there") == PromptKind::Unknown);
}

TEST_CASE("hash embedder is normalized, deterministic and similarity-preserving") {
    HashEmbedder e(128);
    const auto a = e.embed("Alice watched Inception and loved it");
    const auto b = e.embed("Alice watched Inception and loved it");
    const auto c = e.embed("Alice watched Inception and liked it");
    const auto d = e.embed("quarterly tax forms are due in April");
    CHECK(a.dim() == 128);
    double norm = 0;
    for (double x : a.values) norm += x * x;
    CHECK(norm == doctest::Approx(1.0));
    CHECK(a == b);
    CHECK(cosine(a, b) == doctest::Approx(1.0));
    CHECK(cosine(a, c) > cosine(a, d));
    CHECK(cosine(a, d) < 0.3);
}

TEST_CASE("port validates requests") {
    MockBackend mock;
    CHECK(code_of([&] { mock.complete(""); }) == ErrorCode::InvalidInput);
    CHECK(code_of([&] { mock.embed("  "); }) == ErrorCode::InvalidInput);
    CompletionRequest warm{"hello", 16, 0.7, {}};
    CHECK(code_of([&] { mock.complete(warm); }) == ErrorCode::InvalidInput);
    mock.set_determinism(false);
    CHECK_NOTHROW(mock.complete(warm));
}

TEST_CASE("mock answers are a pure function of the prompt") {
    MockBackend m1, m2;
    const auto p = take_action_instruction("Ann");
    CHECK(m1.complete(p) == m1.complete(p));
    CHECK(m1.complete(p) == m2.complete(p));
    CHECK(parse_top_action(m1.complete(p)).ok());
}

TEST_CASE("mock compression yields one sentence and keeps rating clauses") {
    MockBackend m;
    const auto out = m.complete(compression_prompt("[Bob]: Just watched <Inception>, I'd give it 8/10"));
    CHECK(out.find('\n') == std::string::npos);
    const auto ops = extract_opinions(out);
    REQUIRE(ops.size() == 1);
    CHECK(ops[0].speaker == "Bob");
    CHECK(ops[0].title == "Inception");
    CHECK(ops[0].score == 8);
}

TEST_CASE("opinion clauses are extracted in order") {
    const auto ops = extract_opinions("Ann rated <Heat> 3/10; Bob Lee rated <The Matrix> 9/10; Cy rated <X> 11/10");
    REQUIRE(ops.size() == 2);  // 11/10 is out of range
    CHECK(ops[0].speaker == "Ann");
    CHECK(ops[0].title == "Heat");
    CHECK(ops[0].score == 3);
    CHECK(ops[1].speaker == "Bob Lee");
    CHECK(ops[1].title == "The Matrix");
    CHECK(ops[1].score == 9);
}

TEST_CASE("key pool hands out the least loaded key") {
    KeyPool pool({"k0", "k1", "k2"}, 2, std::chrono::milliseconds(50));
    auto a = pool.acquire();
    auto b = pool.acquire();
    auto c = pool.acquire();
    CHECK(a.index() == 0);
    CHECK(b.index() == 1);
    CHECK(c.index() == 2);
    b.release();
    auto d = pool.acquire();
    CHECK(d.index() == 1);
    CHECK(pool.in_flight() == std::vector<std::size_t>{1, 1, 1});
}

TEST_CASE("key pool blocks at the cap and times out with PoolExhausted") {
    KeyPool pool({"only"}, 1, std::chrono::milliseconds(30));
    auto held = pool.acquire();
    CHECK(code_of([&] { pool.acquire(); }) == ErrorCode::PoolExhausted);
    std::atomic<bool> got{false};
    std::thread t([&] {
        auto l = pool.acquire(std::chrono::milliseconds(2000));
        got = l.valid();
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    held.release();
    t.join();
    CHECK(got);
}

TEST_CASE("key pool never exceeds the per-key cap under contention") {
    KeyPool pool({"a", "b"}, 2);
    std::atomic<int> worst{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i)
        threads.emplace_back([&] {
            for (int k = 0; k < 50; ++k) {
                auto l = pool.acquire();
                for (auto n : pool.in_flight()) worst = std::max<int>(worst, static_cast<int>(n));
            }
        });
    for (auto& t : threads) t.join();
    CHECK(worst <= 2);
    CHECK(pool.in_flight() == std::vector<std::size_t>{0, 0});
}

namespace {

struct Script {
    std::vector<HttpResponse> responses;
    std::size_t next = 0;
    std::vector<std::string> paths, bodies, keys;
    std::vector<long long> sleeps;
    HttpPost post() {
        return [this](const std::string& path, const std::string& body, const std::string& key) {
            paths.push_back(path);
            bodies.push_back(body);
            keys.push_back(key);
            return responses.at(std::min(next++, responses.size() - 1));
        };
    }
    SleepFn sleep() {
        return [this](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
    }
};

std::string completion_body(const std::string& content) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

}  // namespace

TEST_CASE("remote backend retries 429 and 5xx with exponential backoff") {
    Script s;
    s.responses = {{429, ""}, {503, ""}, {200, completion_body("[NOTHING]:: Ann does nothing")}};
    RemoteBackend r(RemoteConfig{}, std::make_shared<KeyPool>(std::vector<std::string>{"sk-1"}, 1), s.post(),
                    s.sleep());
    CHECK(r.complete("hi") == "[NOTHING]:: Ann does nothing");
    CHECK(s.sleeps == std::vector<long long>{500, 1000});
    CHECK(s.keys == std::vector<std::string>{"sk-1", "sk-1", "sk-1"});
    const auto body = json::parse(s.bodies[0]);
    CHECK(body["messages"][0]["content"] == "hi");
    CHECK(body["temperature"] == 0.0);
}

TEST_CASE("remote backend surfaces typed failures") {
    {
        Script s;
        s.responses = {{500, ""}};
        RemoteBackend r(RemoteConfig{}, std::make_shared<KeyPool>(std::vector<std::string>{"k"}, 1), s.post(),
                        s.sleep());
        CHECK(code_of([&] { r.complete("hi"); }) == ErrorCode::RemoteUnavailable);
        CHECK(s.paths.size() == 3);
    }
    {
        Script s;
        s.responses = {{401, ""}};
        RemoteBackend r(RemoteConfig{}, std::make_shared<KeyPool>(std::vector<std::string>{"k"}, 1), s.post(),
                        s.sleep());
        CHECK(code_of([&] { r.complete("hi"); }) == ErrorCode::RemoteUnavailable);
        CHECK(s.paths.size() == 1);  // client errors are not retried
    }
    {
        Script s;
        s.responses = {{200, "not json"}};
        RemoteBackend r(RemoteConfig{}, std::make_shared<KeyPool>(std::vector<std::string>{"k"}, 1), s.post(),
                        s.sleep());
        CHECK(code_of([&] { r.complete("hi"); }) == ErrorCode::MalformedResponse);
    }
}

TEST_CASE("remote embeddings check their dimension") {
    Script s;
    RemoteConfig cfg;
    cfg.embed_dim = 3;
    s.responses = {{200, json{{"data", {{{"embedding", {0.6, 0.8, 0.0}}}}}}.dump()},
                   {200, json{{"data", {{{"embedding", {1.0, 0.0}}}}}}.dump()}};
    RemoteBackend r(cfg, std::make_shared<KeyPool>(std::vector<std::string>{"k"}, 1), s.post(), s.sleep());
    CHECK(r.embed("x").values == std::vector<double>{0.6, 0.8, 0.0});
    CHECK(code_of([&] { r.embed("y"); }) == ErrorCode::MalformedResponse);
}
