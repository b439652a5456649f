// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "usersim/agent/action.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/engine/activity.hpp"
#include "usersim/experiments/experiments.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/llm/mock_backend.hpp"
#include "usersim/memory/memory.hpp"
#include "usersim/metrics/metrics.hpp"

using namespace usersim;
using nlohmann::json;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

/// Runs `body`, turning an escaped exception into a FAIL line.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
        const auto [ok, detail] = body();
        report(name, ok, detail);
    } catch (const std::exception& e) {
        report(name, false, std::string("exception: ") + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

SimClock clock_at(std::uint64_t round) {
    return SimClock(parse_datetime("2023-09-12 08:00"), std::chrono::minutes(60)).advanced(round);
}

// ---- forgetting ----

std::pair<bool, std::string> forgetting() {
    const auto t0 = std::chrono::steady_clock::now();
    const double beta = 2.0, delta = 0.2;
    const std::size_t n = 10000;
    const double grid[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    double worst = 0.0;
    MemoryConfig cfg;
    cfg.beta = beta;
    cfg.delta = delta;
    cfg.long_term_capacity = n;
    const std::uint64_t now_round = static_cast<std::uint64_t>(cfg.recency_window);
    const auto now = clock_at(now_round);
    double g11 = -1, g00 = -1;
    for (double s : grid) {
        for (double r : grid) {
            // recency r is reached after (1 - r) * window rounds
            const auto age = static_cast<std::uint64_t>(std::lround((1.0 - r) * cfg.recency_window));
            MemoryStores stores;
            stores.config = cfg;
            for (std::size_t i = 0; i < n; ++i) {
                MemoryRecord rec;
                rec.id = i + 1;
                rec.importance = s;
                rec.timestamp = clock_at(now_round - age);
                rec.tier = MemoryTier::Long;
                stores.long_term.push_back(std::move(rec));
            }
            auto rng = make_rng(2024, {static_cast<std::uint64_t>(s * 4), static_cast<std::uint64_t>(r * 4)});
            const double rate = static_cast<double>(apply_forgetting(stores, now, rng).size()) / n;
            const double expect = 1.0 - (s + r) / 2.0 * std::max(std::pow(r, beta), delta);
            worst = std::max(worst, std::abs(rate - expect));
            if (s == 1.0 && r == 1.0) g11 = forgetting_g(s, r, beta, delta);
            if (s == 0.0 && r == 0.0) g00 = forgetting_g(s, r, beta, delta);
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = worst <= 0.02 && g11 == 0.0 && g00 == 1.0 && secs < 10.0;
    return {ok, fmt("max |rate - g| = %.4f over 25 points, g(1,1) = %g, g(0,0) = %g, %.2fs", worst, g11, g00, secs)};
}

// ---- pareto activity ----

std::pair<bool, std::string> pareto() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    for (double alpha : {1.5, 2.0, 3.0}) {
        ActivityModel m;
        m.alpha = alpha;
        auto rng = make_rng(42, {static_cast<std::uint64_t>(alpha * 10)});
        std::vector<double> xs;
        for (int i = 0; i < 20000; ++i) xs.push_back(sample_activity_level(m, rng));
        const double ks = ks_statistic_pareto(xs, alpha, 1.0);
        const double mle = pareto_mle_fit(std::vector<double>(xs.begin(), xs.begin() + 5000), 1.0);
        const double mle_err = std::abs(mle - alpha) / alpha;
        ok = ok && ks < 0.02 && mle_err < 0.10;
        detail += fmt("a=%.1f ks=%.4f mle=%.3f; ", alpha, ks, mle);
        if (alpha == 2.0) {
            const double mu = mean(xs);
            ok = ok && std::abs(mu - 2.0) / 2.0 < 0.05;
            detail += fmt("mean=%.3f; ", mu);
        }
    }
    const double secs = seconds_since(t0);
    ok = ok && secs < 5.0;
    return {ok, detail + fmt("%.2fs", secs)};
}

// ---- metric fixtures ----

std::pair<bool, std::string> metric_fixtures() {
    const double h = entropy({{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}});
    CategoryExposure degenerate;
    for (int i = 0; i < 10; ++i) degenerate.add(AgentId{1}, "Drama", 1.0);
    const double h0 = cocoon_entropy(degenerate);

    auto rng = make_rng(7, {});
    std::vector<SelectionCase> cases;
    for (int t = 0; t < 10000; ++t) {
        SelectionCase c;
        c.truth = {"pos"};
        c.candidates = {"pos"};
        for (int k = 0; k < 9; ++k) c.candidates.push_back("neg" + std::to_string(k));
        c.selection = {c.candidates[uniform_index(rng, c.candidates.size())]};
        cases.push_back(std::move(c));
    }
    const double acc = selection_accuracy(cases);

    ScoreSeries s;
    s[AgentId{1}] = {5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5};
    s[AgentId{2}] = {5, 6, 6, 6, 6, 6, 6, 6, 6, 6, 6};
    s[AgentId{3}] = {1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1};
    const auto ac = attitude_change(s, {{AgentId{1}, 0}, {AgentId{2}, 1}, {AgentId{3}, 2}});

    const bool ok = std::abs(h - std::log(4.0)) <= 1e-9 && h0 == 0.0 && std::abs(acc - 0.10) <= 0.01 &&
                    ac.at(0) == 0.0 && ac.at(1) == 0.1 && ac.at(2) == 1.0;
    return {ok, fmt("H(uniform4) - ln4 = %.2e, H(degenerate) = %g, random selector = %.4f, ", h - std::log(4.0), h0,
                    acc) +
                    fmt("AC = {%g, %g, %g}", ac.at(0), ac.at(1), ac.at(2))};
}

// ---- cocoon ----

std::pair<bool, std::string> cocoon() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_cocoon(cocoon_config(42), cocoon_arms(15));
    const double secs = seconds_since(t0);
    const double control = r.run("control").final_entropy;
    const double rec = r.run("rec").final_entropy;
    const double soc = r.run("soc").final_entropy;
    const double both = r.run("rec+soc").final_entropy;
    const double n3 = r.run("rec_n3").final_entropy;
    const double n5 = r.run("rec_n5").final_entropy;
    const double drop = r.control_drop();
    const bool ok = drop >= 0.05 && rec > control && both >= rec && both >= soc && n5 > n3 && n3 > rec && secs < 120;
    return {ok, fmt("control drop %.1f%%, control %.4f rec %.4f soc %.4f, ", drop * 100, control, rec, soc) +
                    fmt("rec+soc %.4f, n3 %.4f n5 %.4f, %.1fs", both, n3, n5, secs)};
}

// ---- conformity ----

std::pair<bool, std::string> conformity() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_conformity(conformity_config(42));
    const double secs = seconds_since(t0);
    const bool ok = r.stddev.size() == 11 && r.non_increasing >= 8 && r.spearman_friends_change > 0.5 && secs < 60;
    return {ok, fmt("stddev non-increasing in %g/10 transitions, spearman %.3f, %.1fs", r.non_increasing,
                    r.spearman_friends_change, secs)};
}

// ---- grammar ----

ParseResult parse_fixture(const json& f) {
    const auto parser = f.at("parser").get<std::string>();
    const auto text = f.at("text").get<std::string>();
    if (parser == "top") return parse_top_action(text);
    if (parser == "recommender") return parse_recommender_action(text);
    if (parser == "feeling") return parse_feeling(text);
    if (parser == "post") return parse_post(text);
    return parse_dialogue(text, f.at("a").get<std::string>(), f.at("b").get<std::string>());
}

std::pair<bool, std::string> grammar() {
    std::ifstream in(std::string(USERSIM_FIXTURES) + "/grammar_outputs.json");
    const auto fixtures = json::parse(in);
    std::size_t parsed = 0;
    for (const auto& f : fixtures) {
        const auto r = parse_fixture(f);
        if (r.ok() && std::string(kind_name(r.action().kind)) == f.at("expect").get<std::string>()) ++parsed;
    }

    const std::vector<ActionKind> all = {
        act::EnterRecommender{}, act::EnterSocial{}, act::Nothing{}, act::Buy{"Heat", "Cops and robbers."},
        act::NextPage{},         act::Search{"space movies"},       act::Leave{},
        act::ChatTurns{{{"Ann", "Seen <Heat>?"}, {"Bob", "Yes."}}}, act::Post{"Watch <Inception>!"},
        act::Feeling{"Tense and gripping."}};
    std::size_t round_trips = 0;
    for (const auto& k : all) {
        const auto r = parse_action(render_action(k));
        if (r.ok() && r.action().kind == k) ++round_trips;
    }

    const std::vector<std::string> pieces = {"[", "]", "::", "[BUY]", "[NEXT]", "[SEARCH]", "[LEAVE]", "[SOCIAL]",
                                             "[POST]", "<", ">", "||", ";;", "\n", " ", "[Ann]:", "[Bob]:", "x", "\xff"};
    auto rng = make_rng(99, {});
    std::size_t fuzz = 0, typed = 0, crashes = 0;
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        const auto n = uniform_index(rng, 14);
        for (std::size_t k = 0; k < n; ++k) s += pieces[uniform_index(rng, pieces.size())];
        try {
            for (auto r : {parse_action(s), parse_top_action(s), parse_recommender_action(s), parse_post(s),
                           parse_feeling(s), parse_dialogue(s, "Ann", "Bob")}) {
                ++fuzz;
                if (r.ok() || to_string(r.error().code) != nullptr) ++typed;
            }
        } catch (...) {
            ++crashes;
        }
    }
    const bool ok = parsed == fixtures.size() && round_trips == all.size() && crashes == 0 && typed == fuzz;
    return {ok, std::to_string(parsed) + "/" + std::to_string(fixtures.size()) + " fixtures, " +
                    std::to_string(round_trips) + "/" + std::to_string(all.size()) + " round trips, " +
                    std::to_string(fuzz) + " fuzz parses with " + std::to_string(crashes) + " crashes"};
}

// ---- determinism and persistence ----

std::pair<bool, std::string> determinism() {
    auto cfg = cocoon_config(42);
    auto a = build_engine(cfg);
    auto b = build_engine(cfg);
    a->run(7);
    b->run(7);
    const bool same = a->event_log() == b->event_log();

    auto first = build_engine(cfg);
    first->run(4);
    auto resumed = Engine::load(first->checkpoint(), make_port(first->config(), first->catalog_ptr()));
    resumed->run(3);
    const bool resume_ok = resumed->event_log() == a->event_log();

    auto base = build_engine(cfg);
    base->run(4);
    auto [x, y] = base->fork();
    x->run(3);
    y->run(3);
    const bool fork_ok = x->event_log() == y->event_log() && x->event_log() == a->event_log();

    return {same && resume_ok && fork_ok,
            std::string("identical runs ") + (same ? "match" : "differ") + ", checkpoint@4+3 " +
                (resume_ok ? "matches" : "differs") + ", fork+3 " + (fork_ok ? "matches" : "differs") + " (" +
                std::to_string(a->event_log().size()) + " bytes)"};
}

// ---- memory pipeline ----

std::pair<bool, std::string> memory_pipeline() {
    MockBackend port;
    MemoryStores stores;
    const int k = stores.config.promotion_count;
    const char* obs[] = {
        "Ann watched <Inception> on the recommender system and loved the dream heist plot",
        "Ann watched <Inception> on the recommender system and loved the dream heist story",
        "Ann watched <Inception> on the recommender system and loved the dream heist twist",
        "Ann watched <Inception> on the recommender system and loved the dream heist ending",
    };
    const auto target = observe(stores, port, obs[0], clock_at(1)).record.id;
    std::size_t promoted_after = 0;
    std::size_t enhancements_at_promotion = 0;
    for (int i = 1; i <= 3; ++i) {
        const auto res = observe(stores, port, obs[i], clock_at(1 + i));
        if (!res.promotions.empty() && !promoted_after) {
            promoted_after = static_cast<std::size_t>(i);
            enhancements_at_promotion = res.promotions[0].specific.enhance_count();
        }
    }
    std::size_t specific = 0, insight = 0;
    for (const auto& r : stores.long_term) {
        if (r.kind == MemoryKind::Observation && r.id == target) ++specific;
        if (r.kind == MemoryKind::Insight) ++insight;
    }
    const bool promotion_ok = k == 3 && promoted_after == 3 && enhancements_at_promotion == 3 &&
                              stores.long_term.size() == 2 && specific == 1 && insight == 1;

    // more long-term records than N so the ranking has to choose
    for (const char* extra : {"Bob posted about <Heat> and the bank robbery", "Cy found <Up> touching and sad",
                              "Dee chatted about space travel in <Interstellar>", "Eve thinks heist movies drag on",
                              "Fay dreams of a remake of <Inception>", "Gus skipped the horror night"}) {
        auto rec = sensory_ingest(stores, port, extra, clock_at(6));
        rec.tier = MemoryTier::Long;
        stores.long_term.push_back(std::move(rec));
    }
    observe(stores, port, "Bob watched <Heat> last night", clock_at(7));
    const auto st = stores.short_term;
    const auto readout = read_memory(stores, port, "dream heist movies");
    const auto q = port.embed("dream heist movies");
    std::vector<double> sims;
    for (const auto& r : stores.long_term) sims.push_back(cosine(q, r.embedding));
    std::sort(sims.rbegin(), sims.rend());
    const auto top_n = std::min<std::size_t>(stores.config.retrieval_top_n, stores.long_term.size());
    bool ranked = readout.long_term_top.size() == top_n;
    for (std::size_t i = 0; ranked && i < top_n; ++i) ranked = std::abs(readout.long_term_top[i].similarity - sims[i]) < 1e-12;
    const bool read_ok = readout.short_term_all == st && ranked;

    return {promotion_ok && read_ok,
            "promoted after " + std::to_string(promoted_after) + " similar observations with " +
                std::to_string(enhancements_at_promotion) + " enhancements, long-term = " +
                std::to_string(specific) + " specific + " + std::to_string(insight) + " insight; read_memory " +
                std::to_string(readout.short_term_all.size()) + " short-term + top " +
                std::to_string(readout.long_term_top.size()) + (read_ok ? " ranked" : " MISRANKED")};
}

}  // namespace

int main() {
    criterion("forgetting", forgetting);
    criterion("pareto", pareto);
    criterion("metrics", metric_fixtures);
    criterion("grammar", grammar);
    criterion("determinism", determinism);
    criterion("memory_pipeline", memory_pipeline);
    criterion("conformity", conformity);
    criterion("cocoon", cocoon);
    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
