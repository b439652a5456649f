#include <doctest.h>

#include <filesystem>

#include "usersim/experiments/experiments.hpp"

using namespace usersim;

TEST_CASE("cocoon runner reports every arm with aligned series") {
    auto cfg = cocoon_config(3);
    cfg.rounds = 6;
    CocoonOptions opt;
    opt.replicates = 1;
    opt.window = 3;
    const auto arms = cocoon_arms(3);
    const auto r = run_cocoon(cfg, arms, opt);
    REQUIRE(r.runs.size() == arms.size());
    for (const auto& run : r.runs) {
        CHECK(run.round_entropy.size() == 6);
        CHECK(run.window_entropy.size() == 6);
        CHECK(run.final_entropy == run.window_entropy.back());
        for (double h : run.window_entropy) CHECK(h >= 0.0);
        CHECK_FALSE(run.event_log.empty());
    }
    // arms differ only from their start round on
    const auto& control = r.run("control");
    const auto& rec = r.run("rec");
    for (std::size_t i = 0; i < 2; ++i) CHECK(control.round_entropy[i] == rec.round_entropy[i]);
    CHECK_THROWS(r.run("nope"));
    CHECK(run_cocoon(cfg, arms, opt).runs[1].event_log == rec.event_log);
}

TEST_CASE("conformity runner surveys every agent each round") {
    auto cfg = conformity_config(3);
    cfg.num_agents = 8;
    cfg.rounds = 4;
    const auto r = run_conformity(cfg);
    CHECK(r.scores.size() == 8);
    for (const auto& [id, s] : r.scores) {
        CHECK(s.size() == 5);
        for (double v : s) CHECK((v >= 1 && v <= 10));
    }
    CHECK(r.stddev.size() == 5);
    CHECK(r.non_increasing <= 4);
    CHECK(r.friends.size() == 8);
    CHECK(r.spearman_friends_change >= -1.0);
    CHECK(r.spearman_friends_change <= 1.0);
}

TEST_CASE("believability beats the random selector on synthetic histories") {
    auto cfg = cocoon_config(5);
    cfg.num_agents = 30;
    const auto r = run_believability(cfg, 2, 8, 10);
    CHECK(r.users == 30);
    CHECK(r.cases.size() == 30);
    CHECK(r.random_accuracy == doctest::Approx(0.2).epsilon(0.5));
    CHECK(r.accuracy > r.random_accuracy);
}

TEST_CASE("fit report covers the three exponents") {
    auto cfg = cocoon_config(5);
    cfg.num_agents = 30;
    const auto r = run_fit(cfg, 5000, 5);
    REQUIRE(r.sampler.size() == 3);
    for (const auto& row : r.sampler) {
        CHECK(row.n == 5000);
        CHECK(std::abs(row.alpha_hat - row.alpha) / row.alpha < 0.1);
    }
    // agents that never woke up are left out
    CHECK(r.activity_counts.size() <= 30);
    CHECK(r.activity_counts.size() > 15);
    for (double c : r.activity_counts) CHECK((c >= 1 && c <= 5));
}

TEST_CASE("reports are written as csv and svg") {
    const auto dir = std::filesystem::temp_directory_path() / "usersim_report_test";
    std::filesystem::remove_all(dir);
    auto cfg = conformity_config(1);
    cfg.num_agents = 6;
    cfg.rounds = 2;
    const auto files = write_report(run_conformity(cfg), dir.string());
    CHECK_FALSE(files.empty());
    bool svg = false;
    for (const auto& f : files) {
        CHECK(std::filesystem::file_size(f) > 0);
        svg = svg || f.ends_with(".svg");
    }
    CHECK(svg);
    const auto chart = svg_line_chart("t", "x", "y", {{"a", {{0, 1}, {1, 2}}}});
    CHECK(chart.rfind("<svg", 0) == 0);
    std::filesystem::remove_all(dir);
}
