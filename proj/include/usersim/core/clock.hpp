#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <json.hpp>

namespace usersim {

/// Discrete simulation time. The calendar rendering only feeds prompt context;
/// every scheduling decision uses round_index.
class SimClock {
public:
    using TimePoint = std::chrono::sys_seconds;
    using Duration = std::chrono::seconds;

    SimClock();
    SimClock(TimePoint start, Duration round_duration, std::uint64_t round_index = 0);

    static TimePoint default_start();  // 2023-09-12 08:00

    std::uint64_t round_index() const noexcept { return round_index_; }
    TimePoint start_time() const noexcept { return start_; }
    Duration round_duration() const noexcept { return duration_; }
    TimePoint sim_time() const noexcept {
        return start_ + duration_ * static_cast<std::int64_t>(round_index_);
    }

    SimClock advanced(std::uint64_t rounds = 1) const;

    /// "It is September 12, 2023, 08:00 AM."
    std::string prompt_line() const;
    /// "2023-09-12 08:00"
    std::string iso_minutes() const;

    bool operator==(const SimClock&) const = default;

private:
    TimePoint start_;
    Duration duration_;
    std::uint64_t round_index_ = 0;
};

SimClock advance(const SimClock& clock);

/// Parses "YYYY-MM-DD HH:MM" (or with a 'T' separator).
SimClock::TimePoint parse_datetime(const std::string& text);
std::string format_datetime(SimClock::TimePoint tp);

void to_json(nlohmann::json& j, const SimClock& c);
void from_json(const nlohmann::json& j, SimClock& c);

}  // namespace usersim
