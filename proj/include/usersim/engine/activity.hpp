#pragma once

#include "usersim/core/rng.hpp"

namespace usersim {

/// Pareto activity levels and the per-round activation mapping.
struct ActivityModel {
    double alpha = 2.0;
    double x_min = 1.0;
    double a_ref = 10.0;   // level at which an agent is active every round
    double p_floor = 0.01;

    void validate() const;
    bool operator==(const ActivityModel&) const = default;
};

/// Inverse CDF: x_min * (1 - u)^(-1/alpha) for u in [0, 1).
double pareto_quantile(const ActivityModel& m, double u);
double sample_activity_level(const ActivityModel& m, Rng& rng);
/// clamp(level / a_ref, p_floor, 1)
double activation_probability(double level, const ActivityModel& m);

}  // namespace usersim
