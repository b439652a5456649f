#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "usersim/core/catalog.hpp"
#include "usersim/core/ids.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

enum class InteractionSource { Recommendation, Search };
const char* to_string(InteractionSource s);

struct InteractionEvent {
    AgentId user;
    ItemId item;
    InteractionSource source = InteractionSource::Recommendation;
    std::uint64_t round = 0;
    bool operator==(const InteractionEvent&) const = default;
};

struct RecsysConfig {
    std::string algorithm = "mf";  // "mf" or "random"
    std::size_t page_size = 5;
    std::size_t dim = 32;
    double lr = 0.01;
    double reg = 1e-4;
    int epochs = 5;
    int negatives = 4;
    double init_std = 0.1;
    /// Train on every interaction seen so far instead of only the latest batch.
    bool replay_history = false;
    int max_pages = 3;
    int max_searches = 2;

    void validate() const;
    bool operator==(const RecsysConfig&) const = default;
};

/// Ranking service, separate from the agents: it sees only interaction events.
class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::string name() const = 0;
    /// Items ranked page_index*k .. page_index*k + k - 1.
    virtual std::vector<const Item*> recommend_page(AgentId user, std::size_t page_index, std::size_t k) const = 0;
    virtual void train(const std::vector<InteractionEvent>& events) = 0;
    /// Round used by stochastic recommenders to derive their draws.
    virtual void set_round(std::uint64_t) {}
    virtual nlohmann::json to_json() const = 0;
    virtual void load_json(const nlohmann::json& j) = 0;
};

/// Uniform random pages, derived from (seed, round, user, page).
class RandomRecommender final : public Recommender {
public:
    RandomRecommender(std::shared_ptr<const ItemCatalog> catalog, std::uint64_t seed);
    std::string name() const override { return "random"; }
    std::vector<const Item*> recommend_page(AgentId user, std::size_t page_index, std::size_t k) const override;
    void train(const std::vector<InteractionEvent>&) override {}
    void set_round(std::uint64_t round) override { round_ = round; }
    nlohmann::json to_json() const override;
    void load_json(const nlohmann::json& j) override;

private:
    std::shared_ptr<const ItemCatalog> catalog_;
    std::uint64_t seed_;
    std::uint64_t round_ = 0;
};

/// Implicit-feedback matrix factorization trained with a pairwise logistic loss
/// on (user, clicked item, sampled negative) triples.
class MfRecommender final : public Recommender {
public:
    using Triple = std::tuple<AgentId, std::size_t, std::size_t>;  // user, positive index, negative index

    MfRecommender(std::shared_ptr<const ItemCatalog> catalog, RecsysConfig config, std::uint64_t seed);

    std::string name() const override { return "mf"; }
    std::vector<const Item*> recommend_page(AgentId user, std::size_t page_index, std::size_t k) const override;
    void train(const std::vector<InteractionEvent>& events) override;
    nlohmann::json to_json() const override;
    void load_json(const nlohmann::json& j) override;

    bool knows_user(AgentId user) const { return users_.count(user) > 0; }
    double score(AgentId user, std::size_t item_index) const;
    /// Full ranking of catalog indices for a known user (score desc, id asc).
    std::vector<std::size_t> ranking(AgentId user) const;
    std::vector<std::size_t> popularity_ranking() const;

    /// SGD over a fixed triple list in order, `epochs` times.
    void fit_triples(const std::vector<Triple>& triples, int epochs);
    /// Mean pairwise logistic loss plus L2 over the factors the triples touch.
    double objective(const std::vector<Triple>& triples) const;
    /// Makes sure a user row exists (fresh random factors).
    void ensure_user(AgentId user);

    const RecsysConfig& config() const noexcept { return config_; }
    std::uint64_t train_steps() const noexcept { return train_counter_; }
    bool operator==(const MfRecommender& o) const {
        return users_ == o.users_ && items_ == o.items_ && popularity_ == o.popularity_ &&
               train_counter_ == o.train_counter_ && history_ == o.history_;
    }

private:
    void sgd_step(std::vector<double>& p, std::size_t i, std::size_t j);
    std::vector<double> random_row(Rng& rng) const;

    std::shared_ptr<const ItemCatalog> catalog_;
    RecsysConfig config_;
    std::uint64_t seed_;
    std::map<AgentId, std::vector<double>> users_;
    std::vector<std::vector<double>> items_;
    std::vector<std::uint64_t> popularity_;
    std::uint64_t train_counter_ = 0;
    std::vector<std::pair<AgentId, std::size_t>> history_;
};

std::unique_ptr<Recommender> make_recommender(std::shared_ptr<const ItemCatalog> catalog, const RecsysConfig& config,
                                              std::uint64_t seed);

/// Cosine search over title + description embeddings.
class SearchIndex {
public:
    using EmbedFn = std::function<EmbeddingVector(std::string_view)>;
    SearchIndex(std::shared_ptr<const ItemCatalog> catalog, EmbedFn embed);
    /// Top-k items, ties by id. Throws InvalidInput on an empty query.
    std::vector<const Item*> search(std::string_view query, std::size_t k) const;

private:
    std::shared_ptr<const ItemCatalog> catalog_;
    EmbedFn embed_;
    std::vector<EmbeddingVector> vectors_;
};

/// Replaces n distinct positions with random catalog items not already on the page.
std::vector<const Item*> intervene_randomize(const std::vector<const Item*>& page, std::size_t n,
                                             const ItemCatalog& catalog, Rng& rng);

/// CSV with header round,user,item,source.
std::string interactions_to_csv(const std::vector<InteractionEvent>& events);

}  // namespace usersim
