#include <algorithm>
#include <cmath>
#include <numeric>

#include "usersim/core/error.hpp"
#include "usersim/recsys/recommender.hpp"

namespace usersim {

using nlohmann::json;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// log(1 + exp(-x)) without overflow.
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

template <class T>
void portable_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace

MfRecommender::MfRecommender(std::shared_ptr<const ItemCatalog> catalog, RecsysConfig config, std::uint64_t seed)
    : catalog_(std::move(catalog)), config_(std::move(config)), seed_(seed) {
    if (!catalog_ || catalog_->empty()) throw SimError(ErrorCode::InvalidInput, "MF needs a non-empty catalog");
    config_.validate();
    items_.reserve(catalog_->size());
    for (std::size_t i = 0; i < catalog_->size(); ++i) {
        auto rng = make_rng(seed_, {hash_text("item"), i});
        items_.push_back(random_row(rng));
    }
    popularity_.assign(catalog_->size(), 0);
}

std::vector<double> MfRecommender::random_row(Rng& rng) const {
    std::vector<double> row(config_.dim);
    for (auto& x : row) x = config_.init_std * normal01(rng);
    return row;
}

void MfRecommender::ensure_user(AgentId user) {
    if (users_.count(user)) return;
    auto rng = make_rng(seed_, {hash_text("user"), user.value});
    users_.emplace(user, random_row(rng));
}

double MfRecommender::score(AgentId user, std::size_t item_index) const {
    auto it = users_.find(user);
    if (it == users_.end()) return 0.0;
    return dot(it->second, items_.at(item_index));
}

std::vector<std::size_t> MfRecommender::ranking(AgentId user) const {
    const auto& p = users_.at(user);
    std::vector<double> scores(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) scores[i] = dot(p, items_[i]);
    std::vector<std::size_t> order(items_.size());
    std::iota(order.begin(), order.end(), 0);
    // catalog indices are in ascending id order, so index breaks ties by id
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<std::size_t> MfRecommender::popularity_ranking() const {
    std::vector<std::size_t> order(items_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return popularity_[a] > popularity_[b]; });
    return order;
}

std::vector<const Item*> MfRecommender::recommend_page(AgentId user, std::size_t page_index, std::size_t k) const {
    const auto order = knows_user(user) ? ranking(user) : popularity_ranking();
    std::vector<const Item*> page;
    for (std::size_t r = page_index * k; r < order.size() && page.size() < k; ++r) page.push_back(&catalog_->at(order[r]));
    return page;
}

void MfRecommender::sgd_step(std::vector<double>& p, std::size_t i, std::size_t j) {
    auto& qi = items_[i];
    auto& qj = items_[j];
    double x = 0;
    for (std::size_t k = 0; k < p.size(); ++k) x += p[k] * (qi[k] - qj[k]);
    const double g = sigmoid(-x);  // d/dx of -log sigmoid(x) is -g
    const double lr = config_.lr;
    const double reg = config_.reg;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pk = p[k];
        const double diff = qi[k] - qj[k];
        p[k] += lr * (g * diff - reg * pk);
        qi[k] += lr * (g * pk - reg * qi[k]);
        qj[k] += lr * (-g * pk - reg * qj[k]);
    }
}

void MfRecommender::train(const std::vector<InteractionEvent>& events) {
    if (events.empty()) return;
    std::vector<std::pair<AgentId, std::size_t>> batch;
    for (const auto& e : events) {
        auto idx = catalog_->index_of(e.item);
        if (!idx) throw SimError(ErrorCode::InvalidInput, "interaction with unknown item '" + e.item + "'");
        ensure_user(e.user);
        batch.emplace_back(e.user, *idx);
        ++popularity_[*idx];
    }
    history_.insert(history_.end(), batch.begin(), batch.end());
    auto positives = config_.replay_history ? history_ : batch;
    auto rng = make_rng(seed_, {hash_text("train"), train_counter_});
    ++train_counter_;
    const std::size_t n_items = items_.size();
    if (n_items < 2) return;
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
        portable_shuffle(positives, rng);
        for (const auto& [user, i] : positives) {
            auto& p = users_.at(user);
            for (int s = 0; s < config_.negatives; ++s) {
                std::size_t j = uniform_index(rng, n_items - 1);
                if (j >= i) ++j;  // uniform over items other than i
                sgd_step(p, i, j);
            }
        }
    }
}

void MfRecommender::fit_triples(const std::vector<Triple>& triples, int epochs) {
    for (int e = 0; e < epochs; ++e) {
        for (const auto& [u, i, j] : triples) {
            ensure_user(u);
            sgd_step(users_.at(u), i, j);
        }
    }
}

double MfRecommender::objective(const std::vector<Triple>& triples) const {
    if (triples.empty()) return 0.0;
    double loss = 0;
    std::map<AgentId, bool> users;
    std::vector<bool> touched(items_.size(), false);
    for (const auto& [u, i, j] : triples) {
        const auto& p = users_.at(u);
        double x = 0;
        for (std::size_t k = 0; k < p.size(); ++k) x += p[k] * (items_[i][k] - items_[j][k]);
        loss += softplus_neg(x);
        users[u] = true;
        touched[i] = touched[j] = true;
    }
    double l2 = 0;
    for (const auto& [u, _] : users) l2 += dot(users_.at(u), users_.at(u));
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (touched[i]) l2 += dot(items_[i], items_[i]);
    return loss / static_cast<double>(triples.size()) + 0.5 * config_.reg * l2;
}

json MfRecommender::to_json() const {
    json users = json::array();
    for (const auto& [id, row] : users_) users.push_back({{"id", id.value}, {"factors", row}});
    json hist = json::array();
    for (const auto& [u, i] : history_) hist.push_back({u.value, i});
    return json{{"algorithm", "mf"}, {"users", users}, {"items", items_}, {"popularity", popularity_},
                {"train_counter", train_counter_}, {"history", hist}};
}

void MfRecommender::load_json(const json& j) {
    if (j.at("algorithm").get<std::string>() != "mf") throw SimError(ErrorCode::LoadFailed, "recommender is not mf");
    users_.clear();
    for (const auto& u : j.at("users"))
        users_[AgentId{u.at("id").get<std::uint32_t>()}] = u.at("factors").get<std::vector<double>>();
    items_ = j.at("items").get<std::vector<std::vector<double>>>();
    popularity_ = j.at("popularity").get<std::vector<std::uint64_t>>();
    train_counter_ = j.at("train_counter").get<std::uint64_t>();
    history_.clear();
    for (const auto& h : j.at("history")) history_.emplace_back(AgentId{h.at(0).get<std::uint32_t>()}, h.at(1).get<std::size_t>());
    if (items_.size() != catalog_->size() || popularity_.size() != catalog_->size())
        throw SimError(ErrorCode::LoadFailed, "recommender state does not match the catalog size");
}

}  // namespace usersim
