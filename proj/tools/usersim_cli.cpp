// Command-line entry point: run a simulation, run an experiment, or serve the control API.
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/engine/engine.hpp"
#include "usersim/experiments/experiments.hpp"
#include "usersim/experiments/fixtures.hpp"
#include "usersim/server/http_server.hpp"

using namespace usersim;

namespace {

SimulationConfig load_or_default(const std::string& path, SimulationConfig fallback) {
    return path.empty() ? fallback : load_config_file(path);
}

int run_sim(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> rounds) {
    auto config = load_or_default(config_path, SimulationConfig{});
    if (rounds) config.rounds = *rounds;
    auto engine = build_engine(config);
    std::filesystem::create_directories(out);
    for (std::uint64_t r = 0; r < config.rounds; ++r) {
        engine->run_round();
        const auto& s = engine->round_stats().back();
        std::cout << "round " << r + 1 << ": active=" << s.active << " buys=" << s.buys << " chats=" << s.chats
                  << " posts=" << s.posts << " entropy=" << s.entropy << "\n";
    }
    text::write_file(out + "/events.jsonl", engine->event_log());
    std::vector<MetricPoint> points;
    for (const auto& name : Engine::metric_names())
        for (auto& p : engine->metric_series(name)) points.push_back(p);
    text::write_file(out + "/metrics.csv", metric_points_to_csv(points));
    text::write_file(out + "/interactions.csv", interactions_to_csv(engine->interactions()));
    text::write_file(out + "/checkpoint.json", engine->checkpoint());
    std::cout << "wrote " << out << "/{events.jsonl,metrics.csv,interactions.csv,checkpoint.json}\n";
    return 0;
}

int run_experiment(const std::string& name, const std::string& config_path, const std::string& out, bool plots) {
    if (name == "cocoon") {
        auto report = run_cocoon(load_or_default(config_path, cocoon_config()), cocoon_arms());
        for (const auto& r : report.runs) std::cout << r.name << ": final entropy " << r.final_entropy << "\n";
        std::cout << "control drop vs early max: " << report.control_drop() * 100 << "%\n";
        for (const auto& p : write_report(report, out, plots)) std::cout << "wrote " << p << "\n";
    } else if (name == "conformity") {
        auto report = run_conformity(load_or_default(config_path, conformity_config()));
        std::cout << "stddev:";
        for (double s : report.stddev) std::cout << " " << s;
        std::cout << "\nnon-increasing transitions: " << report.non_increasing << "/" << report.stddev.size() - 1
                  << "\nspearman(friends, change rate): " << report.spearman_friends_change << "\n";
        for (const auto& p : write_report(report, out, plots)) std::cout << "wrote " << p << "\n";
    } else if (name == "believability") {
        auto report = run_believability(load_or_default(config_path, SimulationConfig{}));
        std::cout << "selection accuracy: " << report.accuracy << " (random " << report.random_accuracy << ")\n";
        for (const auto& p : write_report(report, out)) std::cout << "wrote " << p << "\n";
    } else if (name == "fit") {
        auto report = run_fit(load_or_default(config_path, SimulationConfig{}));
        for (const auto& f : report.sampler)
            std::cout << "alpha " << f.alpha << ": alpha_hat " << f.alpha_hat << ", KS " << f.ks << "\n";
        if (report.simulated_alpha_hat) std::cout << "simulated activity alpha_hat " << *report.simulated_alpha_hat << "\n";
        for (const auto& p : write_report(report, out, plots)) std::cout << "wrote " << p << "\n";
    } else {
        std::cerr << "unknown experiment " << name << "\n";
        return 2;
    }
    return 0;
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"usersim: LLM-agnostic recommender + social network user simulator"};
    app.require_subcommand(1);

    std::string config_path, out = "out";
    std::optional<std::uint64_t> rounds;
    auto* run = app.add_subcommand("run", "Run a simulation and write its event log, metrics and checkpoint");
    run->add_option("--config", config_path, "TOML config");
    run->add_option("--out", out, "Output directory");
    run->add_option("--rounds", rounds, "Override sim.rounds");

    std::string experiment;
    bool no_plots = false;
    auto* exp = app.add_subcommand("experiment", "Run one of the study harnesses");
    exp->add_option("--experiment", experiment, "cocoon | conformity | believability | fit")
        ->required()
        ->check(CLI::IsMember({"cocoon", "conformity", "believability", "fit"}));
    exp->add_option("--config", config_path, "TOML config (defaults to the experiment's desk-scale setup)");
    exp->add_option("--out", out, "Output directory");
    exp->add_flag("--no-plots", no_plots, "Skip SVG output");

    std::string host = "127.0.0.1";
    unsigned short port = 8080;
    std::string static_dir;
    auto* serve = app.add_subcommand("serve", "Serve the HTTP/WebSocket control API");
    serve->add_option("--config", config_path, "TOML config");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port (0 picks a free one)");
    serve->add_option("--static", static_dir, "Directory of static UI files to serve at /");

    std::string catalog_out;
    auto* cat = app.add_subcommand("export-catalog", "Write the built-in movie catalog as CSV");
    cat->add_option("path", catalog_out, "Output file")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_sim(config_path, out, rounds);
        if (*exp) return run_experiment(experiment, config_path, out, !no_plots);
        if (*cat) {
            text::write_file(catalog_out, catalog_to_csv(builtin_catalog()));
            return 0;
        }
        if (*serve) {
            auto config = load_or_default(config_path, SimulationConfig{});
            auto controller = std::make_shared<Controller>(build_engine(config));
            HttpServer server(controller, host, port, static_dir);
            server.start();
            std::cout << "listening on http://" << host << ":" << server.port() << "\n" << std::flush;
            std::signal(SIGINT, [](int) { g_stop = true; });
            std::signal(SIGTERM, [](int) { g_stop = true; });
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
            server.stop();
            return 0;
        }
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
