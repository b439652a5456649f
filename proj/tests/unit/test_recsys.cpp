#include <doctest.h>

#include <set>

#include "usersim/core/error.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/llm/embedder.hpp"
#include "usersim/recsys/recommender.hpp"

using namespace usersim;

namespace {

std::shared_ptr<const ItemCatalog> catalog() {
    static const auto c = std::make_shared<const ItemCatalog>(builtin_catalog());
    return c;
}

std::vector<std::size_t> genre_items(const std::string& genre) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < catalog()->size(); ++i) {
        const auto& cats = catalog()->at(i).categories;
        if (std::find(cats.begin(), cats.end(), genre) != cats.end()) out.push_back(i);
    }
    return out;
}

}  // namespace

TEST_CASE("sgd lowers the pairwise objective on a fixed triple set") {
    RecsysConfig cfg;
    cfg.lr = 0.05;
    MfRecommender mf(catalog(), cfg, 7);
    std::vector<MfRecommender::Triple> triples;
    for (std::uint32_t u = 1; u <= 5; ++u) {
        mf.ensure_user(AgentId{u});
        for (std::size_t i = 0; i < 5; ++i) triples.emplace_back(AgentId{u}, i * 3 + u, 70 + i);
    }
    double prev = mf.objective(triples);
    for (int round = 0; round < 10; ++round) {
        mf.fit_triples(triples, 5);
        const double now = mf.objective(triples);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("a trained user's ranking favours the genre they clicked") {
    RecsysConfig cfg;
    cfg.epochs = 20;
    cfg.lr = 0.05;
    MfRecommender mf(catalog(), cfg, 3);
    const auto comedy = genre_items(*catalog()->at(0).categories.begin());
    REQUIRE(comedy.size() >= 6);
    std::vector<InteractionEvent> events;
    for (int rep = 0; rep < 3; ++rep)
        for (std::size_t k = 0; k < 6; ++k) events.push_back({AgentId{1}, catalog()->at(comedy[k]).id});
    mf.train(events);
    const auto page = mf.recommend_page(AgentId{1}, 0, 5);
    REQUIRE(page.size() == 5);
    const std::string genre = *catalog()->at(0).categories.begin();
    std::size_t hits = 0;
    for (const auto* it : page)
        if (std::find(it->categories.begin(), it->categories.end(), genre) != it->categories.end()) ++hits;
    CHECK(hits >= 4);
}

TEST_CASE("ranking is total, ordered by score then id") {
    MfRecommender mf(catalog(), RecsysConfig{}, 1);
    mf.train({{AgentId{2}, catalog()->at(5).id}});
    const auto r = mf.ranking(AgentId{2});
    CHECK(r.size() == catalog()->size());
    CHECK(std::set<std::size_t>(r.begin(), r.end()).size() == r.size());
    for (std::size_t i = 1; i < r.size(); ++i) {
        const double a = mf.score(AgentId{2}, r[i - 1]);
        const double b = mf.score(AgentId{2}, r[i]);
        CHECK((a > b || (a == b && catalog()->at(r[i - 1]).id < catalog()->at(r[i]).id)));
    }
    // pages slice the ranking
    const auto p1 = mf.recommend_page(AgentId{2}, 1, 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(p1[i] == &catalog()->at(r[5 + i]));
}

TEST_CASE("unknown users get the popularity ranking") {
    MfRecommender mf(catalog(), RecsysConfig{}, 1);
    mf.train({{AgentId{1}, catalog()->at(9).id}, {AgentId{2}, catalog()->at(9).id}, {AgentId{3}, catalog()->at(4).id}});
    const auto page = mf.recommend_page(AgentId{99}, 0, 3);
    REQUIRE(page.size() == 3);
    CHECK(page[0] == &catalog()->at(9));
    CHECK(page[1] == &catalog()->at(4));
    CHECK(page[2] == &catalog()->at(0));
}

TEST_CASE("training is deterministic and survives json round trips") {
    std::vector<InteractionEvent> batch1 = {{AgentId{1}, catalog()->at(3).id}, {AgentId{2}, catalog()->at(8).id}};
    std::vector<InteractionEvent> batch2 = {{AgentId{1}, catalog()->at(13).id}, {AgentId{3}, catalog()->at(21).id}};
    MfRecommender a(catalog(), RecsysConfig{}, 11), b(catalog(), RecsysConfig{}, 11);
    a.train(batch1);
    b.train(batch1);
    CHECK(a == b);

    MfRecommender c(catalog(), RecsysConfig{}, 11);
    c.load_json(a.to_json());
    CHECK(c == a);
    a.train(batch2);
    c.train(batch2);
    CHECK(c == a);
    CHECK(c.recommend_page(AgentId{1}, 0, 5) == a.recommend_page(AgentId{1}, 0, 5));

    MfRecommender d(catalog(), RecsysConfig{}, 12);
    d.train(batch1);
    CHECK_FALSE(d == b);
    CHECK_THROWS_AS(a.train({{AgentId{1}, "no-such-item"}}), SimError);
}

TEST_CASE("random recommender pages derive from seed, round and user") {
    RandomRecommender r(catalog(), 5);
    r.set_round(3);
    const auto p = r.recommend_page(AgentId{1}, 0, 5);
    CHECK(p == r.recommend_page(AgentId{1}, 0, 5));
    CHECK(p != r.recommend_page(AgentId{2}, 0, 5));
    // pages of one ranking never overlap
    std::set<const Item*> seen(p.begin(), p.end());
    for (const auto* it : r.recommend_page(AgentId{1}, 1, 5)) CHECK(seen.insert(it).second);
    r.set_round(4);
    CHECK(p != r.recommend_page(AgentId{1}, 0, 5));
    RandomRecommender q(catalog(), 0);
    q.load_json(r.to_json());
    CHECK(q.to_json() == r.to_json());
}

TEST_CASE("intervene_randomize swaps exactly n positions for off-page items") {
    MfRecommender mf(catalog(), RecsysConfig{}, 1);
    const auto page = mf.recommend_page(AgentId{1}, 0, 5);
    for (std::size_t n = 0; n <= 5; ++n) {
        auto rng = make_rng(9, {n});
        const auto out = intervene_randomize(page, n, *catalog(), rng);
        REQUIRE(out.size() == page.size());
        std::size_t changed = 0;
        for (std::size_t i = 0; i < page.size(); ++i)
            if (out[i] != page[i]) {
                ++changed;
                CHECK(std::find(page.begin(), page.end(), out[i]) == page.end());
            }
        CHECK(changed == n);
        CHECK(std::set<const Item*>(out.begin(), out.end()).size() == out.size());
    }
    auto rng = make_rng(1, {});
    CHECK_THROWS_AS(intervene_randomize(page, 6, *catalog(), rng), SimError);
}

TEST_CASE("search ranks the matching title first") {
    HashEmbedder e(256);
    SearchIndex idx(catalog(), [&](std::string_view s) { return e.embed(s); });
    const auto& target = catalog()->at(17);
    const auto hits = idx.search(target.title, 3);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0] == &target);
    CHECK_THROWS_AS(idx.search("   ", 3), SimError);
}

TEST_CASE("config validation and interaction csv") {
    RecsysConfig c;
    CHECK_NOTHROW(c.validate());
    c.page_size = 0;
    CHECK_THROWS_AS(c.validate(), SimError);
    c = {};
    c.algorithm = "deep";
    CHECK_THROWS_AS(c.validate(), SimError);
    const auto csv = interactions_to_csv({{AgentId{3}, "m1", InteractionSource::Search, 4}});
    CHECK(csv == "round,user,item,source\n4,3,m1,search\n");
}
