#include "usersim/experiments/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/core/text.hpp"
#include "usersim/engine/engine.hpp"
#include "usersim/experiments/fixtures.hpp"

namespace usersim {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

std::string ensure_dir(const std::string& dir) {
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write(const std::string& dir, const std::string& name, const std::string& content) {
    const auto path = (std::filesystem::path(dir) / name).string();
    text::write_file(path, content);
    return path;
}

/// Per-round exposure rebuilt from rec_page events.
std::vector<CategoryExposure> exposure_by_round(const Engine& engine, bool first_page_only) {
    std::vector<CategoryExposure> out(engine.round());
    for (const auto& e : engine.events()) {
        if (e.kind != "rec_page" || !e.agent || e.round >= out.size()) continue;
        if (first_page_only && e.payload.value("page", 0) != 0) continue;
        for (const auto& id : e.payload.at("items"))
            if (const auto* item = engine.catalog().find(id.get<std::string>())) out[e.round].add_impression(*e.agent, *item);
    }
    return out;
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<PlotSeries>& series) {
    const double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    const double pad = (y1 - y0) * 0.05;
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                   "#7f7f7f"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        const double xv = x0 + (x1 - x0) * i / 4.0;
        o << "<text x=\"" << L - 5 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv, 3) << "</text>\n";
        o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(xv, 3)
          << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << xml_escape(x_label)
      << "</text>\n";
    o << "<text x=\"15\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << (T + H - B) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto* color = colors[i % std::size(colors)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (auto [x, y] : series[i].points) o << fmt(px(x), 6) << "," << fmt(py(y), 6) << " ";
        o << "\"/>\n";
        const double ly = T + 10 + 18.0 * static_cast<double>(i);
        o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[i].label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

// ---- cocoon ----

const CocoonRun& CocoonReport::run(const std::string& name) const {
    for (const auto& r : runs)
        if (r.name == name) return r;
    throw SimError(ErrorCode::InvalidInput, "no cocoon arm named " + name);
}

double CocoonReport::control_early_max() const {
    const auto& c = run("control");
    double m = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(10, c.window_entropy.size()); ++i)
        m = std::max(m, c.window_entropy[i]);
    return m;
}

double CocoonReport::control_drop() const {
    const double m = control_early_max();
    return m > 0 ? 1.0 - run("control").final_entropy / m : 0.0;
}

SimulationConfig cocoon_config(std::uint64_t seed) {
    SimulationConfig c;
    c.seed = seed;
    c.num_agents = 20;
    c.rounds = 30;
    c.recsys.algorithm = "mf";
    c.recsys.page_size = 5;
    c.recsys.replay_history = true;
    c.recsys.lr = 0.05;
    c.recsys.epochs = 10;
    c.activity.a_ref = 2.0;
    c.activity.p_floor = 0.3;
    c.validate();
    return c;
}

std::vector<CocoonArm> cocoon_arms(std::uint64_t start_round) {
    const std::uint64_t r = start_round > 0 ? start_round - 1 : 0;
    auto rec = [&](std::size_t n) { return InterventionSpec{"rec", r, 1, n, {}}; };
    const InterventionSpec soc{"soc", r, 1, 1, {}};
    return {{"control", {}},         {"rec", {rec(1)}},       {"soc", {soc}},
            {"rec+soc", {rec(1), soc}}, {"rec_n3", {rec(3)}}, {"rec_n5", {rec(5)}}};
}

CocoonReport run_cocoon(const SimulationConfig& base, const std::vector<CocoonArm>& arms,
                        const CocoonOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    CocoonReport report;
    report.options = options;
    report.options.window = std::max<std::size_t>(1, options.window);
    report.options.replicates = std::max<std::size_t>(1, options.replicates);
    const auto window = report.options.window;
    const auto reps = report.options.replicates;
    for (const auto& arm : arms) {
        CocoonRun run;
        run.name = arm.name;
        for (std::size_t rep = 0; rep < reps; ++rep) {
            auto config = base;
            config.seed = base.seed + rep;
            config.interventions = arm.interventions;
            auto engine = build_engine(config, nullptr, {}, options.graph);
            engine->run(config.rounds);
            const auto per_round = exposure_by_round(*engine, options.first_page_only);
            run.round_entropy.resize(per_round.size(), 0.0);
            run.window_entropy.resize(per_round.size(), 0.0);
            for (std::size_t r = 0; r < per_round.size(); ++r) {
                run.round_entropy[r] += cocoon_entropy(per_round[r]) / static_cast<double>(reps);
                CategoryExposure::Raw acc;
                for (std::size_t k = r + 1 > window ? r + 1 - window : 0; k <= r; ++k)
                    for (const auto& [u, cats] : per_round[k].raw())
                        for (const auto& [c, w] : cats) acc[u][c] += w;
                run.window_entropy[r] +=
                    cocoon_entropy(CategoryExposure::from_raw(std::move(acc))) / static_cast<double>(reps);
            }
            if (rep == 0) run.event_log = engine->event_log();
        }
        run.final_entropy = run.window_entropy.empty() ? 0.0 : run.window_entropy.back();
        report.runs.push_back(std::move(run));
    }
    report.seconds = seconds_since(t0);
    return report;
}

// ---- conformity ----

SimulationConfig conformity_config(std::uint64_t seed) {
    SimulationConfig c;
    c.seed = seed;
    c.num_agents = 20;
    c.rounds = 10;
    c.activity.a_ref = 1.0;  // level >= x_min, so every agent acts every round
    c.validate();
    return c;
}

ConformityReport run_conformity(const SimulationConfig& base, const std::string& title) {
    const auto t0 = std::chrono::steady_clock::now();
    PopulationOptions pop;
    pop.p_watcher = 0;
    pop.p_explorer = 0;
    pop.p_critic = 0;
    pop.p_chatter = 0.5;
    pop.p_poster = 0.7;
    GraphOptions graph;
    graph.links_min = 1;
    graph.links_max = 3;
    graph.homophily = 1.0;
    graph.isolated = base.num_agents / 5;
    auto catalog = std::make_shared<const ItemCatalog>(base.catalog_path.empty() ? builtin_catalog()
                                                                                 : load_catalog_file(base.catalog_path));
    if (!catalog->find_by_title(title)) throw SimError(ErrorCode::InvalidInput, "unknown movie " + title);
    auto profiles = generate_population(base.num_agents, *catalog, base.seed, base.activity, pop);
    for (auto& p : profiles) {
        p.features.erase(Feature::Watcher);
        if (!p.features.count(Feature::Chatter) && !p.features.count(Feature::Poster)) p.features.insert(Feature::Poster);
    }
    auto g = generate_graph(profiles, base.seed, graph);
    auto port = make_port(base, catalog);
    Engine engine(base, catalog, profiles, g, port);

    ConformityReport report;
    report.title = catalog->find_by_title(title)->title;
    std::map<AgentId, int> current;
    for (const auto& [id, s] : engine.agents()) {
        auto rng = make_rng(base.seed, {hash_text("opinion"), id.value});
        const int score = 1 + static_cast<int>(uniform_index(rng, 10));
        current[id] = score;
        report.scores[id].push_back(score);
        report.friends[id] = engine.graph().degree(id);
        engine.add_watched(id, report.title);
        engine.observe(id, s.profile.name + " rated <" + report.title + "> " + std::to_string(score) + "/10.");
    }
    for (std::uint64_t r = 0; r < base.rounds; ++r) {
        engine.run_round();
        auto survey = engine.run_survey(SurveyKind::MovieScore, report.title, current);
        for (auto& w : survey.warnings) report.survey_warnings.push_back(std::move(w));
        for (const auto& [id, s] : engine.agents()) {
            // excluded agents keep their previous score in the series
            const int score = survey.scores.count(id) ? survey.scores.at(id) : current[id];
            report.scores[id].push_back(score);
            if (score != current[id])
                engine.observe(id, s.profile.name + " rated <" + report.title + "> " + std::to_string(score) + "/10.");
            current[id] = score;
        }
    }
    const std::size_t len = static_cast<std::size_t>(base.rounds) + 1;
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<double> xs;
        for (const auto& [id, s] : report.scores) xs.push_back(s[t]);
        report.stddev.push_back(stddev(xs));
    }
    for (std::size_t t = 0; t + 1 < len; ++t)
        if (report.stddev[t + 1] <= report.stddev[t] + 1e-12) ++report.non_increasing;
    std::vector<double> deg, rate;
    for (const auto& [id, s] : report.scores) {
        report.change_rates[id] = change_rate(s);
        deg.push_back(static_cast<double>(report.friends[id]));
        rate.push_back(report.change_rates[id]);
    }
    report.spearman_friends_change = spearman(deg, rate);
    report.attitude_change = attitude_change(report.scores, report.friends);
    report.event_log = engine.event_log();
    report.seconds = seconds_since(t0);
    return report;
}

// ---- believability ----

BelievabilityReport run_believability(const SimulationConfig& base, int a, int b, std::size_t history) {
    if (a < 1 || b < 1 || history < static_cast<std::size_t>(a) + 1)
        throw SimError(ErrorCode::InvalidInput, "believability needs a >= 1, b >= 1 and history > a");
    auto catalog = std::make_shared<const ItemCatalog>(base.catalog_path.empty() ? builtin_catalog()
                                                                                 : load_catalog_file(base.catalog_path));
    const auto seeds = generate_population(base.num_agents, *catalog, base.seed, base.activity);
    const auto& items = catalog->items();
    std::vector<AgentProfile> profiles;
    std::vector<std::vector<ItemId>> kept, truth;
    std::vector<std::vector<std::string>> seed_obs, watched;
    for (const auto& s : seeds) {
        auto rng = make_rng(base.seed, {hash_text("history"), s.id.value});
        std::vector<std::size_t> fav, other;
        for (std::size_t i = 0; i < items.size(); ++i) {
            bool liked = false;
            for (const auto& c : items[i].categories)
                liked |= std::find(s.interests.begin(), s.interests.end(), c) != s.interests.end();
            (liked ? fav : other).push_back(i);
        }
        std::vector<ItemId> h;
        while (h.size() < history) {
            auto& pool = (!fav.empty() && (uniform01(rng) < 0.85 || other.empty())) ? fav : other;
            if (pool.empty()) break;
            const auto k = uniform_index(rng, pool.size());
            h.push_back(items[pool[k]].id);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
        }
        if (h.size() < static_cast<std::size_t>(a) + 1) continue;
        std::vector<ItemId> t(h.end() - a, h.end());
        h.resize(h.size() - static_cast<std::size_t>(a));
        auto gen = generate_profile(DatasetHistory{s.id, s.name, h, 2, 3}, *catalog, nullptr);
        gen.profile.activity_level = s.activity_level;
        profiles.push_back(gen.profile);
        kept.push_back(h);
        truth.push_back(t);
        seed_obs.push_back(gen.seed_observations);
        watched.push_back(gen.watched);
    }
    auto port = make_port(base, catalog);
    Engine engine(base, catalog, profiles, SocialGraph{}, port);
    BelievabilityReport report;
    report.a = a;
    report.b = b;
    std::vector<SelectionCase> random_cases;
    for (std::size_t u = 0; u < profiles.size(); ++u) {
        const auto id = profiles[u].id;
        for (const auto& w : watched[u]) engine.add_watched(id, w);
        for (const auto& o : seed_obs[u]) engine.observe(id, o);
        auto rng = make_rng(base.seed, {hash_text("negatives"), id.value});
        std::vector<ItemId> negatives;
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& iid = items[i].id;
            if (std::find(kept[u].begin(), kept[u].end(), iid) == kept[u].end() &&
                std::find(truth[u].begin(), truth[u].end(), iid) == truth[u].end())
                pool.push_back(i);
        }
        for (int k = 0; k < b && !pool.empty(); ++k) {
            const auto j = uniform_index(rng, pool.size());
            negatives.push_back(items[pool[j]].id);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
        }
        SelectionCase sc;
        sc.truth = truth[u];
        sc.candidates = truth[u];
        sc.candidates.insert(sc.candidates.end(), negatives.begin(), negatives.end());
        // shuffle so the truth items are not always listed first
        for (std::size_t i = sc.candidates.size(); i > 1; --i)
            std::swap(sc.candidates[i - 1], sc.candidates[uniform_index(rng, i)]);
        std::vector<const Item*> cands;
        for (const auto& c : sc.candidates) cands.push_back(catalog->find(c));
        sc.selection = engine.select_items(id, cands, a);
        // pad short answers with unpicked candidates so |S_u| = a
        for (const auto& c : sc.candidates) {
            if (static_cast<int>(sc.selection.size()) >= a) break;
            if (std::find(sc.selection.begin(), sc.selection.end(), c) == sc.selection.end()) sc.selection.push_back(c);
        }
        SelectionCase rc = sc;
        rc.selection.clear();
        auto pick = sc.candidates;
        for (int k = 0; k < a; ++k) {
            const auto j = uniform_index(rng, pick.size());
            rc.selection.push_back(pick[j]);
            pick.erase(pick.begin() + static_cast<std::ptrdiff_t>(j));
        }
        report.cases.push_back(std::move(sc));
        random_cases.push_back(std::move(rc));
    }
    report.users = report.cases.size();
    report.accuracy = selection_accuracy(report.cases);
    report.random_accuracy = selection_accuracy(random_cases);
    return report;
}

// ---- fit ----

FitReport run_fit(const SimulationConfig& base, std::size_t samples, std::uint64_t sim_rounds) {
    FitReport report;
    for (double alpha : {1.5, 2.0, 3.0}) {
        ActivityModel m = base.activity;
        m.alpha = alpha;
        auto rng = make_rng(base.seed, {hash_text("fit"), static_cast<std::uint64_t>(alpha * 1000)});
        std::vector<double> xs(samples);
        for (auto& x : xs) x = sample_activity_level(m, rng);
        FitRow row;
        row.alpha = alpha;
        row.n = samples;
        row.alpha_hat = pareto_mle_fit(xs, m.x_min);
        row.ks = ks_statistic_pareto(xs, alpha, m.x_min);
        row.mean = mean(xs);
        report.sampler.push_back(row);
    }
    if (sim_rounds > 0) {
        auto config = base;
        config.rounds = sim_rounds;
        auto engine = build_engine(config);
        engine->run(sim_rounds);
        std::map<AgentId, double> counts;
        for (const auto& [id, s] : engine->agents()) counts[id] = 0;
        for (const auto& e : engine->events())
            if (e.kind == "active" && e.agent) counts[*e.agent] += 1;
        for (const auto& [id, c] : counts)
            if (c >= 1) report.activity_counts.push_back(c);
        try {
            report.simulated_alpha_hat = pareto_mle_fit(report.activity_counts, 1.0);
        } catch (const SimError&) {
            report.simulated_alpha_hat.reset();
        }
    }
    return report;
}

// ---- output ----

std::vector<std::string> write_report(const CocoonReport& r, const std::string& dir, bool plots) {
    ensure_dir(dir);
    std::vector<std::string> paths;
    std::vector<MetricPoint> points;
    std::vector<PlotSeries> series;
    for (const auto& run : r.runs) {
        PlotSeries s{run.name, {}};
        for (std::size_t i = 0; i < run.window_entropy.size(); ++i) {
            points.push_back({i + 1, run.name + "_entropy", run.window_entropy[i]});
            points.push_back({i + 1, run.name + "_round_entropy", run.round_entropy[i]});
            s.points.emplace_back(static_cast<double>(i + 1), run.window_entropy[i]);
        }
        series.push_back(std::move(s));
        paths.push_back(write(dir, "cocoon_" + run.name + "_events.jsonl", run.event_log));
    }
    paths.push_back(write(dir, "cocoon_entropy.csv", metric_points_to_csv(points)));
    json summary = {{"window", r.options.window},
                    {"replicates", r.options.replicates},
                    {"first_page_only", r.options.first_page_only},
                    {"seconds", r.seconds},
                    {"control_early_max", r.control_early_max()},
                    {"control_drop", r.control_drop()}};
    for (const auto& run : r.runs) summary["final_entropy"][run.name] = run.final_entropy;
    paths.push_back(write(dir, "cocoon_summary.json", summary.dump(2) + "\n"));
    if (plots)
        paths.push_back(write(dir, "cocoon_entropy.svg",
                              svg_line_chart("Recommended-category entropy", "round", "entropy", series)));
    return paths;
}

std::vector<std::string> write_report(const ConformityReport& r, const std::string& dir, bool plots) {
    ensure_dir(dir);
    std::vector<std::string> paths;
    std::ostringstream scores;
    scores << "round,agent,friends,score\n";
    for (const auto& [id, s] : r.scores)
        for (std::size_t t = 0; t < s.size(); ++t)
            scores << t << "," << id.value << "," << r.friends.at(id) << "," << s[t] << "\n";
    paths.push_back(write(dir, "conformity_scores.csv", scores.str()));
    std::vector<MetricPoint> points;
    PlotSeries sd{"stddev", {}};
    for (std::size_t t = 0; t < r.stddev.size(); ++t) {
        points.push_back({t, "score_stddev", r.stddev[t]});
        sd.points.emplace_back(static_cast<double>(t), r.stddev[t]);
    }
    paths.push_back(write(dir, "conformity_stddev.csv", metric_points_to_csv(points)));
    std::ostringstream ac;
    ac << "friends,attitude_change\n";
    PlotSeries acs{"AC", {}};
    for (const auto& [i, v] : r.attitude_change) {
        ac << i << "," << v << "\n";
        acs.points.emplace_back(static_cast<double>(i), v);
    }
    paths.push_back(write(dir, "conformity_attitude_change.csv", ac.str()));
    json summary = {{"title", r.title},
                    {"non_increasing_transitions", r.non_increasing},
                    {"spearman_friends_change", r.spearman_friends_change},
                    {"seconds", r.seconds},
                    {"survey_warnings", r.survey_warnings}};
    paths.push_back(write(dir, "conformity_summary.json", summary.dump(2) + "\n"));
    paths.push_back(write(dir, "conformity_events.jsonl", r.event_log));
    if (plots) {
        paths.push_back(write(dir, "conformity_stddev.svg",
                              svg_line_chart("Score standard deviation", "round", "stddev", {sd})));
        paths.push_back(write(dir, "conformity_attitude_change.svg",
                              svg_line_chart("Attitude change by friend count", "friends", "AC", {acs})));
    }
    return paths;
}

std::vector<std::string> write_report(const BelievabilityReport& r, const std::string& dir) {
    ensure_dir(dir);
    std::ostringstream cases;
    cases << "user,truth,candidates,selection\n";
    for (std::size_t u = 0; u < r.cases.size(); ++u)
        cases << u << "," << text::csv_escape(text::join(r.cases[u].truth, "|")) << ","
              << text::csv_escape(text::join(r.cases[u].candidates, "|")) << ","
              << text::csv_escape(text::join(r.cases[u].selection, "|")) << "\n";
    json summary = {{"users", r.users},
                    {"a", r.a},
                    {"b", r.b},
                    {"accuracy", r.accuracy},
                    {"random_accuracy", r.random_accuracy}};
    return {write(dir, "believability_cases.csv", cases.str()),
            write(dir, "believability_summary.json", summary.dump(2) + "\n")};
}

std::vector<std::string> write_report(const FitReport& r, const std::string& dir, bool plots) {
    ensure_dir(dir);
    std::vector<std::string> paths;
    std::ostringstream rows;
    rows << "alpha,n,alpha_hat,ks,mean\n";
    for (const auto& f : r.sampler) rows << f.alpha << "," << f.n << "," << f.alpha_hat << "," << f.ks << "," << f.mean << "\n";
    paths.push_back(write(dir, "fit_sampler.csv", rows.str()));
    std::ostringstream counts;
    counts << "agent_rank,active_rounds\n";
    auto sorted = r.activity_counts;
    std::sort(sorted.rbegin(), sorted.rend());
    for (std::size_t i = 0; i < sorted.size(); ++i) counts << i + 1 << "," << sorted[i] << "\n";
    paths.push_back(write(dir, "fit_activity_counts.csv", counts.str()));
    json summary = json::object();
    summary["simulated_alpha_hat"] = r.simulated_alpha_hat ? json(*r.simulated_alpha_hat) : json(nullptr);
    paths.push_back(write(dir, "fit_summary.json", summary.dump(2) + "\n"));
    if (plots && !sorted.empty()) {
        // complementary CDF on log-log axes
        PlotSeries s{"simulated", {}};
        for (std::size_t i = 0; i < sorted.size(); ++i)
            s.points.emplace_back(std::log(sorted[i]), std::log(static_cast<double>(i + 1) / sorted.size()));
        paths.push_back(write(dir, "fit_activity_ccdf.svg",
                              svg_line_chart("Activity CCDF (log-log)", "ln active rounds", "ln P(X >= x)", {s})));
    }
    return paths;
}

}  // namespace usersim
