#include <doctest.h>

#include <cmath>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/engine/activity.hpp"
#include "usersim/metrics/metrics.hpp"
#include "usersim/metrics/survey.hpp"

using namespace usersim;

TEST_CASE("entropy of a uniform four-way split is ln 4") {
    const std::map<std::string, double> f = {{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}};
    CHECK(std::abs(entropy(f) - std::log(4.0)) < 1e-9);
    CHECK(entropy({{"a", 1.0}}) == 0.0);
    CHECK(entropy({{"a", 1.0}, {"b", 0.0}}) == 0.0);
    CHECK(entropy({{"a", 0.5}, {"b", 0.5}}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("cocoon entropy averages users and splits multi-category items") {
    CategoryExposure e;
    CHECK(cocoon_entropy(e) == 0.0);
    // user 1 sees one category only: entropy 0
    for (int i = 0; i < 4; ++i) e.add(AgentId{1}, "Drama", 1.0);
    CHECK(cocoon_entropy(e) == 0.0);
    // user 2 sees four categories evenly through two two-category items
    e.add_impression(AgentId{2}, Item{"x", "X", "", {"A", "B"}});
    e.add_impression(AgentId{2}, Item{"y", "Y", "", {"C", "D"}});
    const auto f = e.normalized(AgentId{2});
    CHECK(f.at("A") == doctest::Approx(0.25));
    CHECK(cocoon_entropy(e) == doctest::Approx(std::log(4.0) / 2));
}

TEST_CASE("exposure entropy is invariant to repeating every impression") {
    auto rng = make_rng(2, {});
    const std::vector<std::string> cats = {"A", "B", "C", "D", "E"};
    CategoryExposure once, twice;
    for (int i = 0; i < 200; ++i) {
        const AgentId u{static_cast<std::uint32_t>(uniform_index(rng, 7))};
        const auto& c = cats[uniform_index(rng, cats.size())];
        once.add(u, c, 1.0);
        twice.add(u, c, 1.0);
        twice.add(u, c, 1.0);
    }
    CHECK(cocoon_entropy(once) == doctest::Approx(cocoon_entropy(twice)));
    for (auto u : once.users()) {
        const double h = entropy(once.normalized(u));
        CHECK(h >= 0.0);
        CHECK(h <= std::log(5.0) + 1e-12);
    }
}

TEST_CASE("selection accuracy") {
    const std::vector<SelectionCase> cases = {
        {{"a", "b"}, {"a", "b", "c", "d"}, {"a", "c"}},  // 1/2
        {{"x"}, {"x", "y"}, {"x"}},                      // 1
    };
    CHECK(selection_accuracy(cases) == doctest::Approx(0.75));
    CHECK_THROWS_AS(selection_accuracy({{{"a"}, {"b", "c"}, {"b"}}}), SimError);  // truth not among candidates
    CHECK_THROWS_AS(selection_accuracy({}), SimError);
}

TEST_CASE("a uniform random selector scores a / (a + b)") {
    auto rng = make_rng(17, {});
    std::vector<SelectionCase> cases;
    for (int t = 0; t < 10000; ++t) {
        SelectionCase c;
        c.truth = {"pos"};
        c.candidates = {"pos"};
        for (int k = 0; k < 9; ++k) c.candidates.push_back("neg" + std::to_string(k));
        c.selection = {c.candidates[uniform_index(rng, c.candidates.size())]};
        cases.push_back(std::move(c));
    }
    CHECK(std::abs(selection_accuracy(cases) - 0.10) <= 0.01);
}

TEST_CASE("attitude change fixtures") {
    const std::map<AgentId, std::size_t> friends = {{AgentId{1}, 2}, {AgentId{2}, 2}, {AgentId{3}, 5}, {AgentId{4}, 0}};
    ScoreSeries s;
    // 10 rounds after the seed value
    s[AgentId{1}] = {5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5};   // never changes
    s[AgentId{2}] = {5, 6, 6, 6, 6, 6, 6, 6, 6, 6, 6};   // one change
    s[AgentId{3}] = {1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1};   // changes every round
    s[AgentId{4}] = {7, 7, 7, 7, 7, 7, 7, 7, 7, 7, 7};
    const auto ac = attitude_change(s, friends);
    CHECK(ac.at(0) == 0.0);
    CHECK(ac.at(2) == 1.0 / 20.0);
    CHECK(ac.at(5) == 1.0);

    ScoreSeries one = {{AgentId{2}, s[AgentId{2}]}};
    CHECK(attitude_change(one, {{AgentId{2}, 2}}).at(2) == 0.1);
    CHECK(change_rate(s[AgentId{2}]) == 0.1);
    CHECK(change_rate(s[AgentId{3}]) == 1.0);
    CHECK(change_rate(s[AgentId{1}]) == 0.0);
}

TEST_CASE("pareto cdf and mle on hand-made samples") {
    CHECK(pareto_cdf(1.0, 2.0, 1.0) == 0.0);
    CHECK(pareto_cdf(2.0, 2.0, 1.0) == doctest::Approx(0.75));
    CHECK(pareto_cdf(0.5, 2.0, 1.0) == 0.0);
    // n / sum ln(x / x_min) = 2 / (ln 2 + ln 4) = 2 / (3 ln 2)
    CHECK(pareto_mle_fit({2.0, 4.0}, 1.0) == doctest::Approx(2.0 / (3.0 * std::log(2.0))));
    try {
        pareto_mle_fit({1.0, 1.0, 1.0}, 1.0);
        FAIL("expected DegenerateFit");
    } catch (const SimError& e) {
        CHECK(e.code() == ErrorCode::DegenerateFit);
    }
    CHECK_THROWS_AS(pareto_mle_fit({2.0}, 1.0), SimError);
    CHECK_THROWS_AS(pareto_mle_fit({2.0, 0.5}, 1.0), SimError);
}

TEST_CASE("ks statistic on exact quantiles is 1/(2n)") {
    const std::size_t n = 1000;
    ActivityModel m;
    std::vector<double> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(pareto_quantile(m, (i + 0.5) / n));
    CHECK(ks_statistic_pareto(xs, 2.0, 1.0) == doctest::Approx(0.5 / n));
    CHECK(ks_statistic_pareto(xs, 4.0, 1.0) > 0.1);
}

TEST_CASE("activity sampler follows its Pareto law") {
    for (double alpha : {1.5, 2.0, 3.0}) {
        ActivityModel m;
        m.alpha = alpha;
        auto rng = make_rng(100, {static_cast<std::uint64_t>(alpha * 10)});
        std::vector<double> xs;
        for (int i = 0; i < 20000; ++i) xs.push_back(sample_activity_level(m, rng));
        CHECK(ks_statistic_pareto(xs, alpha, 1.0) < 0.02);
        CHECK(std::abs(pareto_mle_fit(std::vector<double>(xs.begin(), xs.begin() + 5000), 1.0) - alpha) / alpha < 0.1);
        for (double x : xs) REQUIRE(x >= 1.0);
    }
}

TEST_CASE("activation probability is clamped level over reference") {
    ActivityModel m;
    CHECK(activation_probability(5.0, m) == doctest::Approx(0.5));
    CHECK(activation_probability(50.0, m) == 1.0);
    CHECK(activation_probability(0.0, m) == doctest::Approx(m.p_floor));
}

TEST_CASE("spearman uses average ranks for ties") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 1, 1}, {1, 2, 3}) == 0.0);
    // x ranks 1.5,1.5,3,4 ; y ranks 1,2,3,4 -> pearson of ranks
    const std::vector<double> rx = {1.5, 1.5, 3, 4}, ry = {1, 2, 3, 4};
    const double mx = 2.5, my = 2.5;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 4; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    CHECK(spearman({7, 7, 8, 9}, {1, 2, 3, 4}) == doctest::Approx(sxy / std::sqrt(sxx * syy)));
}

TEST_CASE("mean and population stddev") {
    CHECK(mean({1, 2, 3, 4}) == doctest::Approx(2.5));
    CHECK(stddev({2, 4, 4, 4, 5, 5, 7, 9}) == doctest::Approx(2.0));
    CHECK(stddev({3}) == 0.0);
}

TEST_CASE("survey answers") {
    CHECK(*parse_survey_score("I'd say 7 out of 10").score == 7);
    const auto hi = parse_survey_score("Easily 15!");
    CHECK(*hi.score == 10);
    CHECK(hi.clamped);
    CHECK(*parse_survey_score("0").score == 1);
    CHECK_FALSE(parse_survey_score("no idea").score.has_value());

    const Item a{"1", "Heat", "", {"Crime"}}, b{"2", "Up", "", {"Family"}}, c{"3", "Alien", "", {"Horror"}};
    const std::vector<const Item*> cands = {&a, &b, &c};
    CHECK(parse_selection("[SELECT]:: <heat>; <Nope>; <Alien>; <Heat>", cands) == std::vector<ItemId>{"1", "3"});
    CHECK(parse_selection("nothing", cands).empty());
}

TEST_CASE("metric csv") {
    CHECK(metric_points_to_csv({{3, "entropy", 0.5}}) == "round,metric,value\n3,entropy,0.5\n");
}
