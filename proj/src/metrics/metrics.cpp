#include "usersim/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

double selection_accuracy(const std::vector<SelectionCase>& cases) {
    if (cases.empty()) throw SimError(ErrorCode::InvalidInput, "no selection cases");
    double sum = 0;
    for (const auto& c : cases) {
        if (c.truth.empty()) throw SimError(ErrorCode::InvalidInput, "empty ground truth");
        std::set<ItemId> truth(c.truth.begin(), c.truth.end());
        std::set<ItemId> picked(c.selection.begin(), c.selection.end());
        if (!c.candidates.empty()) {
            std::set<ItemId> cand(c.candidates.begin(), c.candidates.end());
            for (const auto& t : truth)
                if (!cand.count(t)) throw SimError(ErrorCode::InvalidInput, "ground truth '" + t + "' is not a candidate");
            for (const auto& s : picked)
                if (!cand.count(s)) throw SimError(ErrorCode::InvalidInput, "selection '" + s + "' is not a candidate");
        }
        std::size_t hit = 0;
        for (const auto& s : picked) hit += truth.count(s);
        sum += static_cast<double>(hit) / static_cast<double>(truth.size());
    }
    return sum / static_cast<double>(cases.size());
}

void CategoryExposure::add_impression(AgentId user, const Item& item) {
    if (item.categories.empty()) return;
    const double w = 1.0 / static_cast<double>(item.categories.size());
    for (const auto& c : item.categories) counts_[user][c] += w;
}

void CategoryExposure::add(AgentId user, const std::string& category, double weight) {
    if (weight < 0) throw SimError(ErrorCode::InvalidInput, "negative exposure weight");
    counts_[user][category] += weight;
}

std::map<std::string, double> CategoryExposure::normalized(AgentId user) const {
    std::map<std::string, double> out;
    auto it = counts_.find(user);
    if (it == counts_.end()) return out;
    double total = 0;
    for (const auto& [_, v] : it->second) total += v;
    if (total <= 0) return out;
    for (const auto& [c, v] : it->second) out[c] = v / total;
    return out;
}

std::vector<AgentId> CategoryExposure::users() const {
    std::vector<AgentId> out;
    for (const auto& [u, _] : counts_) out.push_back(u);
    return out;
}

double entropy(const std::map<std::string, double>& dist) {
    double h = 0;
    for (const auto& [_, f] : dist)
        if (f > 0) h -= f * std::log(f);
    return std::max(0.0, h);
}

double cocoon_entropy(const CategoryExposure& exposure) {
    double sum = 0;
    std::size_t n = 0;
    for (auto u : exposure.users()) {
        auto d = exposure.normalized(u);
        if (d.empty()) continue;
        sum += entropy(d);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double change_rate(const std::vector<int>& scores) {
    if (scores.size() < 2) return 0.0;
    std::size_t changes = 0;
    for (std::size_t r = 1; r < scores.size(); ++r) changes += scores[r] != scores[r - 1];
    return static_cast<double>(changes) / static_cast<double>(scores.size() - 1);
}

std::map<std::size_t, double> attitude_change(const ScoreSeries& series,
                                              const std::map<AgentId, std::size_t>& friend_counts) {
    std::map<std::size_t, std::pair<double, std::size_t>> buckets;  // changes, users
    std::size_t rounds = 0;
    for (const auto& [u, s] : series) {
        if (s.size() < 2) throw SimError(ErrorCode::InvalidInput, "score series needs at least rounds 0 and 1");
        if (rounds == 0) rounds = s.size() - 1;
        if (s.size() - 1 != rounds) throw SimError(ErrorCode::InvalidInput, "score series lengths differ");
        auto fc = friend_counts.find(u);
        if (fc == friend_counts.end()) throw SimError(ErrorCode::InvalidInput, "no friend count for agent " + u.str());
        std::size_t changes = 0;
        for (std::size_t r = 1; r < s.size(); ++r) changes += s[r] != s[r - 1];
        auto& b = buckets[fc->second];
        b.first += static_cast<double>(changes);
        b.second += 1;
    }
    std::map<std::size_t, double> out;
    for (const auto& [i, b] : buckets) out[i] = b.first / (static_cast<double>(rounds) * static_cast<double>(b.second));
    return out;
}

double pareto_mle_fit(const std::vector<double>& samples, double x_min) {
    if (!(x_min > 0)) throw SimError(ErrorCode::InvalidInput, "x_min must be positive");
    if (samples.size() < 2) throw SimError(ErrorCode::InvalidInput, "need at least 2 samples");
    double s = 0;
    for (double x : samples) {
        if (!(x >= x_min)) throw SimError(ErrorCode::InvalidInput, "sample below x_min");
        s += std::log(x / x_min);
    }
    if (s <= 0) throw SimError(ErrorCode::DegenerateFit, "all samples equal x_min");
    return static_cast<double>(samples.size()) / s;
}

double pareto_cdf(double x, double alpha, double x_min) {
    if (x < x_min) return 0.0;
    return 1.0 - std::pow(x_min / x, alpha);
}

double ks_statistic_pareto(std::vector<double> samples, double alpha, double x_min) {
    if (samples.empty()) throw SimError(ErrorCode::InvalidInput, "no samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = pareto_cdf(samples[i], alpha, x_min);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw SimError(ErrorCode::InvalidInput, "spearman needs paired samples");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double mx = mean(rx), my = mean(ry);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double s = 0;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size()));
}

std::string metric_points_to_csv(const std::vector<MetricPoint>& points) {
    std::ostringstream out;
    out.precision(10);
    out << "round,metric,value\n";
    for (const auto& p : points) out << p.round << "," << text::csv_escape(p.metric) << "," << p.value << "\n";
    return out.str();
}

}  // namespace usersim
