#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "usersim/core/catalog.hpp"
#include "usersim/core/ids.hpp"

namespace usersim {

struct SelectionCase {
    std::vector<ItemId> truth;       // T_u
    std::vector<ItemId> candidates;  // T_u plus negatives
    std::vector<ItemId> selection;   // S_u
};

/// Mean over users of |T_u ∩ S_u| / |T_u|. Throws InvalidInput on an invalid case.
double selection_accuracy(const std::vector<SelectionCase>& cases);

/// Per-user category frequencies from recommended impressions. An item with
/// several categories adds 1/|categories| to each.
class CategoryExposure {
public:
    void add_impression(AgentId user, const Item& item);
    void add(AgentId user, const std::string& category, double weight);
    /// f_{u,c}, summing to 1 per user.
    std::map<std::string, double> normalized(AgentId user) const;
    std::vector<AgentId> users() const;
    bool empty() const noexcept { return counts_.empty(); }

    using Raw = std::map<AgentId, std::map<std::string, double>>;
    const Raw& raw() const noexcept { return counts_; }
    static CategoryExposure from_raw(Raw raw) {
        CategoryExposure e;
        e.counts_ = std::move(raw);
        return e;
    }
    bool operator==(const CategoryExposure&) const = default;

private:
    std::map<AgentId, std::map<std::string, double>> counts_;
};

/// -sum f ln f, with 0 ln 0 = 0.
double entropy(const std::map<std::string, double>& distribution);
/// Mean entropy over users with any impression; 0 when there are none.
double cocoon_entropy(const CategoryExposure& exposure);

/// Scores per user for rounds 0..R (index = round).
using ScoreSeries = std::map<AgentId, std::vector<int>>;

/// Fraction of round-over-round changes for one series.
double change_rate(const std::vector<int>& scores);

/// AC(i) for each friend count i present among users: changes over rounds
/// 1..R summed over users with i friends, divided by R * |U_i|.
std::map<std::size_t, double> attitude_change(const ScoreSeries& series, const std::map<AgentId, std::size_t>& friend_counts);

/// α̂ = n / Σ ln(x_i / x_min). Throws DegenerateFit when every sample equals x_min,
/// InvalidInput for fewer than 2 samples or samples below x_min.
double pareto_mle_fit(const std::vector<double>& samples, double x_min);

double pareto_cdf(double x, double alpha, double x_min);
/// Kolmogorov-Smirnov distance between the samples and the Pareto CDF.
double ks_statistic_pareto(std::vector<double> samples, double alpha, double x_min);

/// Spearman rank correlation with average ranks for ties; 0 if either side is constant.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& xs);
/// Population standard deviation.
double stddev(const std::vector<double>& xs);

struct MetricPoint {
    std::uint64_t round;
    std::string metric;
    double value;
};
/// Header round,metric,value.
std::string metric_points_to_csv(const std::vector<MetricPoint>& points);

}  // namespace usersim
