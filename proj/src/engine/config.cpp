#include "usersim/engine/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

using nlohmann::json;

void InterventionSpec::validate() const {
    if (strategy != "rec" && strategy != "soc")
        throw SimError(ErrorCode::ConfigInvalid, "intervention strategy must be rec or soc, got '" + strategy + "'");
    if (period < 1) throw SimError(ErrorCode::ConfigInvalid, "intervention period must be >= 1");
    if (n < 1) throw SimError(ErrorCode::ConfigInvalid, "intervention n must be >= 1");
}

void SimulationConfig::validate() const {
    if (determinism && !seed_given) throw SimError(ErrorCode::ConfigInvalid, "sim.seed is required in determinism mode");
    if (num_agents < 1) throw SimError(ErrorCode::ConfigInvalid, "sim.num_agents must be positive");
    if (round_minutes < 1) throw SimError(ErrorCode::ConfigInvalid, "sim.round_minutes must be positive");
    if (max_dialogue_turns < 2) throw SimError(ErrorCode::ConfigInvalid, "sim.max_dialogue_turns must be >= 2");
    if (llm.backend != "mock" && llm.backend != "remote")
        throw SimError(ErrorCode::ConfigInvalid, "llm.backend must be mock or remote");
    if (llm.backend == "remote" && llm.keys.empty())
        throw SimError(ErrorCode::ConfigInvalid, "llm.keys is empty for the remote backend");
    if (llm.max_concurrency_per_key < 1) throw SimError(ErrorCode::ConfigInvalid, "llm.max_concurrency_per_key must be >= 1");
    if (llm.embed_dim < 8) throw SimError(ErrorCode::ConfigInvalid, "llm.embed_dim must be >= 8");
    memory.validate();
    recsys.validate();
    activity.validate();
    for (const auto& i : interventions) i.validate();
}

namespace {

template <class T>
void read(const toml::table& t, const char* key, T& out) {
    if (auto v = t[key].value<T>()) out = *v;
}

void read_size(const toml::table& t, const char* key, std::size_t& out) {
    if (auto v = t[key].value<std::int64_t>()) {
        if (*v < 0) throw SimError(ErrorCode::ConfigInvalid, std::string(key) + " must be >= 0");
        out = static_cast<std::size_t>(*v);
    }
}

void read_u64(const toml::table& t, const char* key, std::uint64_t& out) {
    if (auto v = t[key].value<std::int64_t>()) {
        if (*v < 0) throw SimError(ErrorCode::ConfigInvalid, std::string(key) + " must be >= 0");
        out = static_cast<std::uint64_t>(*v);
    }
}

void read_int(const toml::table& t, const char* key, int& out) {
    if (auto v = t[key].value<std::int64_t>()) out = static_cast<int>(*v);
}

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path path(p);
    if (path.is_absolute()) return p;
    return (std::filesystem::path(base) / path).lexically_normal().string();
}

}  // namespace

SimulationConfig parse_config_toml(std::string_view toml_text, const std::string& base_dir) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "TOML: " << e.description() << " at line " << e.source().begin.line;
        throw SimError(ErrorCode::ConfigInvalid, msg.str());
    }
    SimulationConfig c;
    c.seed_given = false;
    if (auto* sim = root["sim"].as_table()) {
        if (auto v = (*sim)["seed"].value<std::int64_t>()) {
            c.seed = static_cast<std::uint64_t>(*v);
            c.seed_given = true;
        }
        read(*sim, "determinism", c.determinism);
        read_size(*sim, "num_agents", c.num_agents);
        read_u64(*sim, "rounds", c.rounds);
        read(*sim, "catalog", c.catalog_path);
        read(*sim, "profiles", c.profiles_path);
        read(*sim, "graph", c.graph_path);
        read(*sim, "start_time", c.start_time);
        read_int(*sim, "round_minutes", c.round_minutes);
        read_size(*sim, "max_dialogue_turns", c.max_dialogue_turns);
        read_int(*sim, "role_play_timeout_ms", c.role_play_timeout_ms);
    }
    c.catalog_path = resolve(base_dir, c.catalog_path);
    c.profiles_path = resolve(base_dir, c.profiles_path);
    c.graph_path = resolve(base_dir, c.graph_path);
    if (auto* llm = root["llm"].as_table()) {
        read(*llm, "backend", c.llm.backend);
        if (auto* keys = (*llm)["keys"].as_array())
            for (const auto& k : *keys)
                if (auto s = k.value<std::string>()) c.llm.keys.push_back(*s);
        std::string keys_env;
        read(*llm, "keys_env", keys_env);
        if (!keys_env.empty()) {
            if (const char* env = std::getenv(keys_env.c_str()))
                for (auto& k : text::split(env, ","))
                    if (!text::trim(k).empty()) c.llm.keys.push_back(text::trim(k));
        }
        read_size(*llm, "max_concurrency_per_key", c.llm.max_concurrency_per_key);
        read_size(*llm, "embed_dim", c.llm.embed_dim);
        read(*llm, "base_url", c.llm.base_url);
        read(*llm, "model", c.llm.model);
        read(*llm, "embedding_model", c.llm.embedding_model);
        read(*llm, "temperature", c.llm.temperature);
        read_int(*llm, "max_tokens", c.llm.max_tokens);
        read_int(*llm, "timeout_ms", c.llm.timeout_ms);
    }
    if (auto* m = root["memory"].as_table()) {
        read(*m, "similarity_threshold", c.memory.similarity_threshold);
        read_int(*m, "promotion_count", c.memory.promotion_count);
        read_int(*m, "retrieval_top_n", c.memory.retrieval_top_n);
        read(*m, "beta", c.memory.beta);
        read(*m, "delta", c.memory.delta);
        read_int(*m, "recency_window", c.memory.recency_window);
        read(*m, "reflection_merge_threshold", c.memory.reflection_merge_threshold);
        read_int(*m, "reflection_period", c.memory.reflection_period);
        read_int(*m, "reflection_sources", c.memory.reflection_sources);
        read_size(*m, "long_term_capacity", c.memory.long_term_capacity);
        read_size(*m, "short_term_capacity", c.memory.short_term_capacity);
        read_size(*m, "compression_cap", c.memory.compression_cap);
    }
    if (auto* r = root["recsys"].as_table()) {
        read(*r, "algorithm", c.recsys.algorithm);
        read_size(*r, "page_size", c.recsys.page_size);
        read_size(*r, "dim", c.recsys.dim);
        read(*r, "lr", c.recsys.lr);
        read(*r, "reg", c.recsys.reg);
        read_int(*r, "epochs", c.recsys.epochs);
        read_int(*r, "negatives", c.recsys.negatives);
        read(*r, "init_std", c.recsys.init_std);
        read(*r, "replay_history", c.recsys.replay_history);
        read_int(*r, "max_pages", c.recsys.max_pages);
        read_int(*r, "max_searches", c.recsys.max_searches);
    }
    if (auto* a = root["activity"].as_table()) {
        read(*a, "alpha", c.activity.alpha);
        read(*a, "x_min", c.activity.x_min);
        read(*a, "a_ref", c.activity.a_ref);
        read(*a, "p_floor", c.activity.p_floor);
    }
    if (auto* arr = root["interventions"].as_array()) {
        for (const auto& node : *arr) {
            const auto* t = node.as_table();
            if (!t) throw SimError(ErrorCode::ConfigInvalid, "interventions must be an array of tables");
            InterventionSpec s;
            read(*t, "strategy", s.strategy);
            read_u64(*t, "start_round", s.start_round);
            read_u64(*t, "period", s.period);
            read_size(*t, "n", s.n);
            if (auto* agents = (*t)["agents"].as_array())
                for (const auto& a : *agents)
                    if (auto v = a.value<std::int64_t>()) s.agents.push_back(AgentId{static_cast<std::uint32_t>(*v)});
            c.interventions.push_back(std::move(s));
        }
    }
    c.validate();
    return c;
}

SimulationConfig load_config_file(const std::string& path) {
    const auto content = text::read_file(path);
    const auto base = std::filesystem::path(path).parent_path().string();
    return parse_config_toml(content, base.empty() ? "." : base);
}

void to_json(json& j, const InterventionSpec& s) {
    std::vector<std::uint32_t> agents;
    for (auto a : s.agents) agents.push_back(a.value);
    j = json{{"strategy", s.strategy}, {"start_round", s.start_round}, {"period", s.period}, {"n", s.n}, {"agents", agents}};
}

void from_json(const json& j, InterventionSpec& s) {
    s.strategy = j.at("strategy").get<std::string>();
    s.start_round = j.value("start_round", std::uint64_t{0});
    s.period = j.value("period", std::uint64_t{1});
    s.n = j.value("n", std::size_t{1});
    s.agents.clear();
    for (const auto& a : j.value("agents", json::array())) s.agents.push_back(AgentId{a.get<std::uint32_t>()});
    s.validate();
}

void to_json(json& j, const RecsysConfig& c) {
    j = json{{"algorithm", c.algorithm}, {"page_size", c.page_size}, {"dim", c.dim},
             {"lr", c.lr}, {"reg", c.reg}, {"epochs", c.epochs},
             {"negatives", c.negatives}, {"init_std", c.init_std}, {"replay_history", c.replay_history},
             {"max_pages", c.max_pages}, {"max_searches", c.max_searches}};
}

void from_json(const json& j, RecsysConfig& c) {
    RecsysConfig d;
    c.algorithm = j.value("algorithm", d.algorithm);
    c.page_size = j.value("page_size", d.page_size);
    c.dim = j.value("dim", d.dim);
    c.lr = j.value("lr", d.lr);
    c.reg = j.value("reg", d.reg);
    c.epochs = j.value("epochs", d.epochs);
    c.negatives = j.value("negatives", d.negatives);
    c.init_std = j.value("init_std", d.init_std);
    c.replay_history = j.value("replay_history", d.replay_history);
    c.max_pages = j.value("max_pages", d.max_pages);
    c.max_searches = j.value("max_searches", d.max_searches);
}

void to_json(json& j, const ActivityModel& m) {
    j = json{{"alpha", m.alpha}, {"x_min", m.x_min}, {"a_ref", m.a_ref}, {"p_floor", m.p_floor}};
}

void from_json(const json& j, ActivityModel& m) {
    ActivityModel d;
    m.alpha = j.value("alpha", d.alpha);
    m.x_min = j.value("x_min", d.x_min);
    m.a_ref = j.value("a_ref", d.a_ref);
    m.p_floor = j.value("p_floor", d.p_floor);
}

void to_json(json& j, const SimulationConfig& c) {
    // API keys stay out of serialized state
    j = json{{"seed", c.seed},
             {"seed_given", c.seed_given},
             {"determinism", c.determinism},
             {"num_agents", c.num_agents},
             {"rounds", c.rounds},
             {"catalog_path", c.catalog_path},
             {"profiles_path", c.profiles_path},
             {"graph_path", c.graph_path},
             {"start_time", c.start_time},
             {"round_minutes", c.round_minutes},
             {"max_dialogue_turns", c.max_dialogue_turns},
             {"role_play_timeout_ms", c.role_play_timeout_ms},
             {"memory", c.memory},
             {"recsys", c.recsys},
             {"activity", c.activity},
             {"llm",
              {{"backend", c.llm.backend},
               {"max_concurrency_per_key", c.llm.max_concurrency_per_key},
               {"embed_dim", c.llm.embed_dim},
               {"base_url", c.llm.base_url},
               {"model", c.llm.model},
               {"embedding_model", c.llm.embedding_model},
               {"temperature", c.llm.temperature},
               {"max_tokens", c.llm.max_tokens},
               {"timeout_ms", c.llm.timeout_ms}}},
             {"interventions", c.interventions}};
}

void from_json(const json& j, SimulationConfig& c) {
    SimulationConfig d;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.seed_given = j.value("seed_given", true);
    c.determinism = j.value("determinism", d.determinism);
    c.num_agents = j.value("num_agents", d.num_agents);
    c.rounds = j.value("rounds", d.rounds);
    c.catalog_path = j.value("catalog_path", d.catalog_path);
    c.profiles_path = j.value("profiles_path", d.profiles_path);
    c.graph_path = j.value("graph_path", d.graph_path);
    c.start_time = j.value("start_time", d.start_time);
    c.round_minutes = j.value("round_minutes", d.round_minutes);
    c.max_dialogue_turns = j.value("max_dialogue_turns", d.max_dialogue_turns);
    c.role_play_timeout_ms = j.value("role_play_timeout_ms", d.role_play_timeout_ms);
    c.memory = j.at("memory").get<MemoryConfig>();
    c.recsys = j.at("recsys").get<RecsysConfig>();
    c.activity = j.at("activity").get<ActivityModel>();
    const auto& l = j.at("llm");
    c.llm.backend = l.value("backend", d.llm.backend);
    c.llm.max_concurrency_per_key = l.value("max_concurrency_per_key", d.llm.max_concurrency_per_key);
    c.llm.embed_dim = l.value("embed_dim", d.llm.embed_dim);
    c.llm.base_url = l.value("base_url", d.llm.base_url);
    c.llm.model = l.value("model", d.llm.model);
    c.llm.embedding_model = l.value("embedding_model", d.llm.embedding_model);
    c.llm.temperature = l.value("temperature", d.llm.temperature);
    c.llm.max_tokens = l.value("max_tokens", d.llm.max_tokens);
    c.llm.timeout_ms = l.value("timeout_ms", d.llm.timeout_ms);
    c.interventions = j.value("interventions", json::array()).get<std::vector<InterventionSpec>>();
}

}  // namespace usersim
