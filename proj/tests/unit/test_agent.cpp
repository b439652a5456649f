#include <doctest.h>

#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "usersim/agent/action.hpp"
#include "usersim/agent/agent.hpp"
#include "usersim/agent/profile.hpp"
#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/llm/mock_backend.hpp"

using namespace usersim;
using nlohmann::json;

namespace {

json load_fixtures() {
    std::ifstream in(std::string(USERSIM_FIXTURES) + "/grammar_outputs.json");
    REQUIRE(in.good());
    return json::parse(in);
}

ParseResult parse_with(const json& f) {
    const auto parser = f.at("parser").get<std::string>();
    const auto text = f.at("text").get<std::string>();
    if (parser == "top") return parse_top_action(text);
    if (parser == "recommender") return parse_recommender_action(text);
    if (parser == "feeling") return parse_feeling(text);
    if (parser == "post") return parse_post(text);
    return parse_dialogue(text, f.at("a").get<std::string>(), f.at("b").get<std::string>());
}

/// Channel that replays canned answers and records every request it sees.
struct ScriptedChannel : DecisionChannel {
    std::deque<std::optional<std::string>> answers;
    std::vector<DecisionRequest> seen;
    std::optional<std::string> decide(const DecisionRequest& r) override {
        seen.push_back(r);
        if (answers.empty()) return std::nullopt;
        auto a = answers.front();
        answers.pop_front();
        return a;
    }
};

ItemCatalog catalog() {
    return ItemCatalog({{"1", "Inception", "A thief enters dreams.", {"Sci-Fi", "Thriller"}},
                        {"2", "Heat", "Cops and robbers.", {"Crime", "Thriller"}},
                        {"3", "Interstellar", "Space travel.", {"Sci-Fi", "Drama"}},
                        {"4", "The Notebook", "A love story.", {"Romance", "Drama"}}});
}

AgentProfile base_profile() {
    AgentProfile p;
    p.id = AgentId{1};
    p.name = "Ann Lee";
    p.gender = "female";
    p.age = 30;
    p.traits = {"curious"};
    p.career = "engineer";
    p.interests = {"Sci-Fi"};
    p.features = {Feature::Watcher, Feature::Poster};
    return p;
}

}  // namespace

TEST_CASE("every grammar fixture parses to its expected kind") {
    const auto fixtures = load_fixtures();
    REQUIRE(fixtures.size() >= 12);
    std::size_t ok = 0;
    for (const auto& f : fixtures) {
        INFO(f.at("text").get<std::string>());
        const auto r = parse_with(f);
        REQUIRE(r.ok());
        CHECK(std::string(kind_name(r.action().kind)) == f.at("expect").get<std::string>());
        if (f.contains("title")) CHECK(r.action().as<act::Buy>().title == f["title"].get<std::string>());
        if (f.contains("query")) CHECK(r.action().as<act::Search>().query == f["query"].get<std::string>());
        if (f.contains("mentions"))
            CHECK(angle_mentions(r.action().as<act::Post>().text) == f["mentions"].get<std::vector<std::string>>());
        if (f.contains("turns")) {
            const auto& turns = r.action().as<act::ChatTurns>().turns;
            CHECK(turns.size() == f["turns"].get<std::size_t>());
            for (std::size_t i = 0; i < turns.size(); ++i)
                CHECK(turns[i].speaker == (i % 2 == 0 ? f["a"] : f["b"]).get<std::string>());
        }
        ++ok;
    }
    CHECK(ok == fixtures.size());
}

TEST_CASE("buy descriptions are split off at either separator") {
    const auto a = parse_recommender_action("[BUY]:: <Heat>||Cops and robbers.");
    REQUIRE(a.ok());
    CHECK(a.action().as<act::Buy>().description == "Cops and robbers.");
    const auto b = parse_recommender_action("[BUY]:: Heat;;Cops and robbers.");
    REQUIRE(b.ok());
    CHECK(b.action().as<act::Buy>().title == "Heat");
}

TEST_CASE("render then parse is the identity for every action kind") {
    const std::vector<ActionKind> all = {
        act::EnterRecommender{},
        act::EnterSocial{},
        act::Nothing{},
        act::Buy{"Son of Flubber", "A 1963 comedy."},
        act::Buy{"...And Justice for All", ""},
        act::NextPage{},
        act::Search{"space movies"},
        act::Leave{},
        act::ChatTurns{{{"Ann", "Hi Bob, seen <Heat>?"}, {"Bob", "Yes, loved it."}, {"Ann", "Great!"}}},
        act::Post{"Just watched <Inception>, highly recommend!"},
        act::Feeling{"I found <Heat> tense and gripping."},
    };
    for (const auto& k : all) {
        const auto text = render_action(k);
        INFO(text);
        const auto r = parse_action(text);
        REQUIRE(r.ok());
        CHECK(r.action().kind == k);
    }
}

TEST_CASE("parsers return typed errors for malformed output") {
    CHECK(parse_top_action("").error().code == ParseErrorCode::Empty);
    CHECK(parse_top_action("I think I'll rest").error().code == ParseErrorCode::NoTag);
    CHECK(parse_action("[DANCE]:: Ann dances").error().code == ParseErrorCode::UnknownTag);
    CHECK(parse_top_action("[BUY]:: <Heat>").error().code == ParseErrorCode::UnexpectedTag);
    CHECK(parse_recommender_action("[SOCIAL]:: Ann").error().code == ParseErrorCode::UnexpectedTag);
    CHECK(parse_recommender_action("[SEARCH]::   ").error().code == ParseErrorCode::MissingPayload);
    CHECK(parse_recommender_action("[BUY]:: ").error().code == ParseErrorCode::MissingPayload);
    CHECK(parse_dialogue("no speakers here", "A", "B").error().code == ParseErrorCode::NoTurns);
    CHECK(parse_post("   \n  ").error().code == ParseErrorCode::Empty);
}

TEST_CASE("fuzzed outputs never crash the parsers") {
    const std::vector<std::string> pieces = {"[", "]", "::", "[BUY]", "[NEXT]", "[SEARCH]", "[LEAVE]", "[SOCIAL]",
                                             "[RECOMMENDER]", "[NOTHING]", "[POST]", "[FEELING]", "<", ">", "||",
                                             ";;", "\n", " ", "Ann", "[Ann]:", "[Bob]:", "x", "\t", "\xff", "\0"};
    auto rng = make_rng(11, {});
    std::size_t oks = 0, errs = 0;
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        const auto n = uniform_index(rng, 12);
        for (std::size_t k = 0; k < n; ++k) s += pieces[uniform_index(rng, pieces.size())];
        for (auto r : {parse_action(s), parse_top_action(s), parse_recommender_action(s), parse_post(s), parse_feeling(s),
                       parse_dialogue(s, "Ann", "Bob")}) {
            if (r.ok()) {
                ++oks;
            } else {
                ++errs;
                CHECK(to_string(r.error().code) != nullptr);
            }
        }
        CHECK_NOTHROW(parse_action(s));
    }
    CHECK(oks > 0);
    CHECK(errs > 0);
}

TEST_CASE("randomly generated actions survive render then parse") {
    auto rng = make_rng(5, {});
    const std::vector<std::string> words = {"Ann", "loved", "the", "movie", "Heat!", "really", "Sci-Fi", "2001:",
                                            "it's", "great", "(1999)", "and", "so", "on", "Ocean's", "11"};
    auto phrase = [&](std::size_t min_words) {
        std::string out;
        const auto n = min_words + uniform_index(rng, 6);
        for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + words[uniform_index(rng, words.size())];
        return out;
    };
    for (int i = 0; i < 2000; ++i) {
        ActionKind k;
        switch (uniform_index(rng, 10)) {
            case 0: k = act::EnterRecommender{}; break;
            case 1: k = act::EnterSocial{}; break;
            case 2: k = act::Nothing{}; break;
            case 3: k = act::Buy{phrase(1), uniform_index(rng, 2) ? phrase(1) : ""}; break;
            case 4: k = act::NextPage{}; break;
            case 5: k = act::Search{phrase(1)}; break;
            case 6: k = act::Leave{}; break;
            case 7: {
                act::ChatTurns c;
                const auto n = 1 + uniform_index(rng, 6);
                for (std::size_t t = 0; t < n; ++t) c.turns.push_back({t % 2 ? "Bob Ray" : "Ann Lee", phrase(1)});
                k = c;
                break;
            }
            case 8: k = act::Post{phrase(1) + " <" + phrase(1) + ">"}; break;
            default: k = act::Feeling{phrase(2)}; break;
        }
        const auto text = render_action(k);
        INFO(text);
        const auto r = parse_action(text);
        REQUIRE(r.ok());
        CHECK(r.action().kind == k);
    }
}

TEST_CASE("dialogue parsing drops foreign speakers, merges repeats and caps turns") {
    const std::string text =
        "[Bob]: I speak first but should be dropped\n"
        "[Ann]: Hi Bob!\n"
        "[Ann]: Seen <Heat>?\n"
        "[Narrator]: meanwhile\n"
        "[Bob]: Yes.\n"
        "[Ann]: Cool.\n"
        "[Bob]: Bye.\n";
    const auto r = parse_dialogue(text, "Ann", "Bob", 3);
    REQUIRE(r.ok());
    const auto& t = r.action().as<act::ChatTurns>().turns;
    REQUIRE(t.size() == 3);
    CHECK(t[0].speaker == "Ann");
    CHECK(t[0].text.find("Hi Bob!") != std::string::npos);
    CHECK(t[0].text.find("Seen <Heat>?") != std::string::npos);
    CHECK(t[1].speaker == "Bob");
    CHECK(t[2].speaker == "Ann");
}

TEST_CASE("an off-page buy is re-prompted once and then defaults to leave") {
    const auto cat = catalog();
    const std::vector<const Item*> page = {&cat.at(0), &cat.at(1)};
    ScriptedChannel ch;
    ch.answers = {"[BUY]:: <Titanic>||ship", "[BUY]:: <Avatar>"};
    const auto d = decide_recommender_action(ch, AgentId{1}, "Ann", PromptBundle{"summary", "memory", "", ""}, page, "");
    CHECK(d.defaulted);
    CHECK(d.attempts == 2);
    CHECK(d.action.is<act::Leave>());
    REQUIRE(ch.seen.size() == 2);
    CHECK(ch.seen[1].attempt == 1);
    CHECK(ch.seen[1].prompt.find(markers::kRetry) != std::string::npos);
    CHECK(ch.seen[0].context["page"].size() == 2);
}

TEST_CASE("a buy resolves to the catalog spelling of an on-page title") {
    const auto cat = catalog();
    const std::vector<const Item*> page = {&cat.at(0), &cat.at(1)};
    ScriptedChannel ch;
    ch.answers = {"[BUY]:: <heat>"};
    const auto d = decide_recommender_action(ch, AgentId{1}, "Ann", PromptBundle{"s", "m", "", ""}, page, "");
    REQUIRE(d.action.is<act::Buy>());
    CHECK(d.action.as<act::Buy>().title == "Heat");
    CHECK(d.action.as<act::Buy>().description == "Cops and robbers.");
    CHECK_FALSE(d.defaulted);
}

TEST_CASE("top action falls back to nothing after a bad answer and a timeout") {
    ScriptedChannel ch;
    ch.answers = {"gibberish", std::nullopt};
    const auto d = decide_top_action(ch, AgentId{1}, "Ann", PromptBundle{"s", "m", "", ""});
    CHECK(d.defaulted);
    CHECK(d.action.is<act::Nothing>());
    CHECK(d.warnings.size() == 2);
}

TEST_CASE("unparseable dialogue raises ChatFailed") {
    ScriptedChannel ch;
    ch.answers = {"nothing", "still nothing"};
    try {
        generate_dialogue(ch, AgentId{1}, "Ann", "Bob", PromptBundle{"s", "m", "", ""});
        FAIL("expected ChatFailed");
    } catch (const SimError& e) {
        CHECK(e.code() == ErrorCode::ChatFailed);
    }
}

TEST_CASE("posts lose brackets around unknown titles") {
    ScriptedChannel ch;
    ch.answers = {"Loved <Heat> and <Made Up Movie>!"};
    const auto d = generate_post(ch, AgentId{1}, "Ann", PromptBundle{"s", "m", "", ""}, {"Heat"});
    CHECK(d.action.as<act::Post>().text == "Loved <Heat> and Made Up Movie!");
    CHECK(d.warnings.size() == 1);
}

TEST_CASE("item mentions resolve against the catalog") {
    const auto cat = catalog();
    const auto ms = extract_item_mentions("Try <inception> or <Nope>", cat);
    REQUIRE(ms.size() == 2);
    REQUIRE(ms[0].item != nullptr);
    CHECK(ms[0].item->id == "1");
    CHECK(ms[1].item == nullptr);
}

TEST_CASE("profile validation names the broken field") {
    const auto cat = catalog();
    auto p = base_profile();
    CHECK_NOTHROW(validate_profile(p, &cat));
    p.interests = {"Westerns"};
    CHECK_THROWS_AS(validate_profile(p, &cat), SimError);
    p = base_profile();
    p.features.clear();
    CHECK_THROWS_AS(validate_profile(p), SimError);
    p = base_profile();
    p.relationships[p.id] = "self";
    CHECK_THROWS_AS(validate_profile(p), SimError);
}

TEST_CASE("profile patches bump the version and refuse relationships") {
    const auto cat = catalog();
    const auto p = base_profile();
    const auto patched = apply_patch(p, parse_profile_patch({{"interests", {"Drama"}}, {"age", 31}}), &cat);
    CHECK(patched.version == p.version + 1);
    CHECK(patched.age == 31);
    CHECK(patched.interests == std::vector<std::string>{"Drama"});
    CHECK(patched.name == p.name);
    auto code = [](auto f) {
        try {
            f();
        } catch (const SimError& e) {
            return e.code();
        }
        return ErrorCode::InvalidInput;
    };
    CHECK(code([] { parse_profile_patch({{"relationships", json::object()}}); }) == ErrorCode::InvalidPatch);
    CHECK(code([] { parse_profile_patch({{"shoe_size", 9}}); }) == ErrorCode::InvalidPatch);
    CHECK(code([] { parse_profile_patch({{"features", {"Dancer"}}}); }) == ErrorCode::InvalidPatch);
    CHECK(code([&] { apply_patch(p, parse_profile_patch({{"age", -1}}), &cat); }) == ErrorCode::InvalidPatch);
}

TEST_CASE("profiles round trip through jsonl") {
    auto a = base_profile();
    auto b = base_profile();
    b.id = AgentId{2};
    b.name = "Bob";
    b.relationships[a.id] = "friend";
    const std::vector<AgentProfile> ps = {a, b};
    CHECK(profiles_from_jsonl(profiles_to_jsonl(ps)) == ps);
}

TEST_CASE("profile strategies") {
    const auto cat = catalog();
    MockBackend mock;

    const auto hand = generate_profile(HandcraftedSpec{base_profile()}, cat, nullptr);
    CHECK(hand.profile == base_profile());

    PartialProfile partial;
    partial.id = AgentId{5};
    partial.name = "Cy Park";
    partial.age = 44;
    const auto gen = generate_profile(partial, cat, &mock);
    CHECK(gen.profile.name == "Cy Park");
    CHECK(gen.profile.age == 44);
    CHECK_NOTHROW(validate_profile(gen.profile, &cat));
    // same inputs, same profile
    CHECK(generate_profile(partial, cat, &mock).profile == gen.profile);
    CHECK_THROWS_AS(generate_profile(partial, cat, nullptr), SimError);

    DatasetHistory hist{AgentId{6}, "Dee", {"1", "3", "2"}, 1, 2};
    const auto ds = generate_profile(hist, cat, nullptr);
    CHECK(ds.profile.interests == std::vector<std::string>{"Sci-Fi"});
    CHECK(ds.watched == std::vector<std::string>{"Inception", "Interstellar", "Heat"});
    CHECK(ds.seed_observations.size() == 2);
    CHECK(ds.seed_observations.back().find("<Heat>") != std::string::npos);
}

TEST_CASE("summary cache is keyed by profile version") {
    SummaryCache c;
    c.put(AgentId{1}, 0, "take_action", "old");
    c.put(AgentId{1}, 1, "take_action", "new");
    c.put(AgentId{2}, 0, "take_action", "other");
    REQUIRE(c.find(AgentId{1}, 1, "take_action") != nullptr);
    CHECK(*c.find(AgentId{1}, 1, "take_action") == "new");
    CHECK(c.find(AgentId{1}, 1, "post") == nullptr);
    CHECK(SummaryCache::from_json(c.to_json()) == c);
    c.invalidate(AgentId{1});
    CHECK(c.find(AgentId{1}, 1, "take_action") == nullptr);
    CHECK(c.size() == 1);
}

TEST_CASE("profile summaries never echo the observation") {
    MockBackend mock;
    const auto p = base_profile();
    const std::string obs = "Ann Lee is browsing the recommender system";
    const auto s = summarize_profile_for(mock, p, obs, [](AgentId) { return std::string("x"); });
    CHECK_FALSE(s.empty());
    CHECK(s.find(obs) == std::string::npos);
}
