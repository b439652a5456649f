#include <algorithm>
#include <numeric>
#include <set>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/recsys/recommender.hpp"

namespace usersim {

using nlohmann::json;

const char* to_string(InteractionSource s) {
    return s == InteractionSource::Recommendation ? "recommendation" : "search";
}

void RecsysConfig::validate() const {
    auto fail = [](const std::string& m) { throw SimError(ErrorCode::ConfigInvalid, "recsys." + m); };
    if (algorithm != "mf" && algorithm != "random") fail("algorithm must be mf or random");
    if (page_size < 1) fail("page_size must be positive");
    if (dim < 1) fail("dim must be positive");
    if (!(lr > 0)) fail("lr must be positive");
    if (!(reg >= 0)) fail("reg must be >= 0");
    if (epochs < 0) fail("epochs must be >= 0");
    if (negatives < 1) fail("negatives must be positive");
    if (!(init_std > 0)) fail("init_std must be positive");
    if (max_pages < 1) fail("max_pages must be positive");
    if (max_searches < 0) fail("max_searches must be >= 0");
}

RandomRecommender::RandomRecommender(std::shared_ptr<const ItemCatalog> catalog, std::uint64_t seed)
    : catalog_(std::move(catalog)), seed_(seed) {
    if (!catalog_ || catalog_->empty()) throw SimError(ErrorCode::InvalidInput, "random recommender needs items");
}

std::vector<const Item*> RandomRecommender::recommend_page(AgentId user, std::size_t page_index, std::size_t k) const {
    // one shuffled ranking per (round, user); pages slice it
    auto rng = make_rng(seed_, {hash_text("random-rec"), round_, user.value});
    std::vector<std::size_t> order(catalog_->size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    std::vector<const Item*> page;
    for (std::size_t r = page_index * k; r < order.size() && page.size() < k; ++r) page.push_back(&catalog_->at(order[r]));
    return page;
}

json RandomRecommender::to_json() const { return json{{"algorithm", "random"}, {"round", round_}}; }

void RandomRecommender::load_json(const json& j) {
    if (j.at("algorithm").get<std::string>() != "random")
        throw SimError(ErrorCode::LoadFailed, "recommender is not random");
    round_ = j.at("round").get<std::uint64_t>();
}

std::unique_ptr<Recommender> make_recommender(std::shared_ptr<const ItemCatalog> catalog, const RecsysConfig& config,
                                              std::uint64_t seed) {
    config.validate();
    if (config.algorithm == "random") return std::make_unique<RandomRecommender>(std::move(catalog), seed);
    return std::make_unique<MfRecommender>(std::move(catalog), config, seed);
}

SearchIndex::SearchIndex(std::shared_ptr<const ItemCatalog> catalog, EmbedFn embed)
    : catalog_(std::move(catalog)), embed_(std::move(embed)) {
    for (const auto& item : catalog_->items()) vectors_.push_back(embed_(item.title + " " + item.description));
}

std::vector<const Item*> SearchIndex::search(std::string_view query, std::size_t k) const {
    if (text::trim(query).empty()) throw SimError(ErrorCode::InvalidInput, "empty search query");
    const auto q = embed_(query);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        double s = cosine(q, vectors_[i]);
        // an exact title match always ranks first
        if (text::title_key(catalog_->at(i).title) == text::title_key(query)) s += 2.0;
        scored.emplace_back(s, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const Item*> out;
    for (std::size_t r = 0; r < scored.size() && out.size() < k; ++r) out.push_back(&catalog_->at(scored[r].second));
    return out;
}

std::vector<const Item*> intervene_randomize(const std::vector<const Item*>& page, std::size_t n,
                                             const ItemCatalog& catalog, Rng& rng) {
    if (n > page.size()) throw SimError(ErrorCode::InvalidInput, "cannot replace more items than the page holds");
    std::vector<const Item*> out = page;
    if (n == 0) return out;
    // choose n distinct positions
    std::vector<std::size_t> positions(page.size());
    std::iota(positions.begin(), positions.end(), 0);
    for (std::size_t i = 0; i < n; ++i) std::swap(positions[i], positions[i + uniform_index(rng, positions.size() - i)]);
    positions.resize(n);
    std::sort(positions.begin(), positions.end());
    std::set<ItemId> on_page;
    for (const auto* it : page) on_page.insert(it->id);
    std::vector<const Item*> pool;
    for (const auto& item : catalog.items())
        if (!on_page.count(item.id)) pool.push_back(&item);
    for (auto pos : positions) {
        if (pool.empty()) break;
        const auto k = uniform_index(rng, pool.size());
        out[pos] = pool[k];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
    }
    return out;
}

std::string interactions_to_csv(const std::vector<InteractionEvent>& events) {
    std::string out = "round,user,item,source\n";
    for (const auto& e : events)
        out += std::to_string(e.round) + "," + std::to_string(e.user.value) + "," + text::csv_escape(e.item) + "," +
               to_string(e.source) + "\n";
    return out;
}

}  // namespace usersim
