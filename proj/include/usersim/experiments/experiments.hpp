#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "usersim/engine/config.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/metrics/metrics.hpp"

namespace usersim {

/// A labelled polyline for svg_line_chart.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series);

// Rounds are reported 1-based below: round r is engine round index r - 1.

struct CocoonArm {
    std::string name;
    std::vector<InterventionSpec> interventions;
};

struct CocoonRun {
    std::string name;
    std::vector<double> round_entropy;   // impressions of each round alone
    std::vector<double> window_entropy;  // impressions of the trailing window ending at each round
    double final_entropy = 0.0;          // window_entropy.back()
    std::string event_log;               // first replicate
};

struct CocoonOptions {
    std::size_t window = 15;
    /// Seeds base.seed .. base.seed + replicates - 1; entropies are averaged over them.
    std::size_t replicates = 6;
    /// Count only the first page of each session, the recommender's own top-N.
    bool first_page_only = true;
    /// Friendships mostly within shared interests, so the control feed is an echo chamber.
    GraphOptions graph{1, 3, 10.0, 0};
};

struct CocoonReport {
    std::vector<CocoonRun> runs;
    CocoonOptions options;
    double seconds = 0.0;

    const CocoonRun& run(const std::string& name) const;
    /// Max of the control arm's window entropy over rounds 1..10.
    double control_early_max() const;
    /// 1 - final / early max for the control arm.
    double control_drop() const;
};

/// 20 agents, 30 rounds, MF with top-5 pages, mock backend.
SimulationConfig cocoon_config(std::uint64_t seed = 42);
/// control, rec (n=1), soc, rec+soc and the rec dose arms n=3 and n=5, all from `start_round`.
std::vector<CocoonArm> cocoon_arms(std::uint64_t start_round = 15);
CocoonReport run_cocoon(const SimulationConfig& base, const std::vector<CocoonArm>& arms, const CocoonOptions& options = {});

struct ConformityReport {
    std::string title;
    ScoreSeries scores;                     // index 0 = seeded opinion, then one survey per round
    std::vector<double> stddev;             // per index
    std::size_t non_increasing = 0;         // transitions with stddev[t+1] <= stddev[t]
    std::map<AgentId, std::size_t> friends;
    std::map<AgentId, double> change_rates;
    double spearman_friends_change = 0.0;
    std::map<std::size_t, double> attitude_change;
    std::vector<std::string> survey_warnings;
    double seconds = 0.0;
    std::string event_log;
};

/// 20 agents, 10 rounds; social-only agents that are active every round.
SimulationConfig conformity_config(std::uint64_t seed = 42);
ConformityReport run_conformity(const SimulationConfig& base, const std::string& title = "Inception");

struct BelievabilityReport {
    std::size_t users = 0;
    int a = 0;
    int b = 0;
    double accuracy = 0.0;         // agents
    double random_accuracy = 0.0;  // uniform random selector over the same splits
    std::vector<SelectionCase> cases;
};

/// Synthetic interaction histories (mostly within each user's favourite genres):
/// each agent is built from its history minus the last `a` items and must pick
/// `a` of those items mixed with `b` unseen negatives.
BelievabilityReport run_believability(const SimulationConfig& base, int a = 2, int b = 8, std::size_t history = 10);

struct FitRow {
    double alpha = 0.0;
    double alpha_hat = 0.0;
    double ks = 0.0;
    double mean = 0.0;
    std::size_t n = 0;
};

struct FitReport {
    std::vector<FitRow> sampler;        // activity sampler vs estimator
    std::vector<double> activity_counts;  // active rounds per agent in a short simulation
    std::optional<double> simulated_alpha_hat;
};

FitReport run_fit(const SimulationConfig& base, std::size_t samples = 20000, std::uint64_t sim_rounds = 20);

/// CSV + SVG files under `dir` (created if missing). Returns the written paths.
std::vector<std::string> write_report(const CocoonReport& r, const std::string& dir, bool plots = true);
std::vector<std::string> write_report(const ConformityReport& r, const std::string& dir, bool plots = true);
std::vector<std::string> write_report(const BelievabilityReport& r, const std::string& dir);
std::vector<std::string> write_report(const FitReport& r, const std::string& dir, bool plots = true);

}  // namespace usersim
