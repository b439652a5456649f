#include "usersim/engine/activity.hpp"

#include <algorithm>
#include <cmath>

#include "usersim/core/error.hpp"

namespace usersim {

void ActivityModel::validate() const {
    if (!(alpha > 0)) throw SimError(ErrorCode::ConfigInvalid, "activity.alpha must be positive");
    if (!(x_min > 0)) throw SimError(ErrorCode::ConfigInvalid, "activity.x_min must be positive");
    if (!(a_ref > 0)) throw SimError(ErrorCode::ConfigInvalid, "activity.a_ref must be positive");
    if (!(p_floor > 0 && p_floor < 1)) throw SimError(ErrorCode::ConfigInvalid, "activity.p_floor must be in (0,1)");
}

double pareto_quantile(const ActivityModel& m, double u) {
    if (!(u >= 0 && u < 1)) throw SimError(ErrorCode::InvalidInput, "u must be in [0,1)");
    return m.x_min * std::pow(1.0 - u, -1.0 / m.alpha);
}

double sample_activity_level(const ActivityModel& m, Rng& rng) { return pareto_quantile(m, uniform01(rng)); }

double activation_probability(double level, const ActivityModel& m) {
    return std::clamp(level / m.a_ref, m.p_floor, 1.0);
}

}  // namespace usersim
