#include "usersim/core/clock.hpp"

#include <array>
#include <cstdio>
#include <json.hpp>

#include "usersim/core/error.hpp"

namespace usersim {

using namespace std::chrono;

SimClock::SimClock() : SimClock(default_start(), hours(1), 0) {}

SimClock::SimClock(TimePoint start, Duration round_duration, std::uint64_t round_index)
    : start_(start), duration_(round_duration), round_index_(round_index) {
    if (round_duration <= Duration::zero())
        throw SimError(ErrorCode::InvalidInput, "round_duration must be positive");
}

SimClock::TimePoint SimClock::default_start() {
    return sys_days{year{2023} / September / 12} + hours(8);
}

SimClock SimClock::advanced(std::uint64_t rounds) const {
    return SimClock(start_, duration_, round_index_ + rounds);
}

SimClock advance(const SimClock& clock) { return clock.advanced(1); }

std::string SimClock::prompt_line() const {
    static const std::array<const char*, 12> kMonths = {
        "January", "February", "March",     "April",   "May",      "June",
        "July",    "August",   "September", "October", "November", "December"};
    const auto tp = sim_time();
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss hms{tp - day};
    int hour = static_cast<int>(hms.hours().count());
    const int minute = static_cast<int>(hms.minutes().count());
    const char* meridiem = hour < 12 ? "AM" : "PM";
    int hour12 = hour % 12;
    if (hour12 == 0) hour12 = 12;
    char buf[96];
    std::snprintf(buf, sizeof buf, "It is %s %u, %d, %02d:%02d %s.",
                  kMonths[static_cast<unsigned>(ymd.month()) - 1],
                  static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()), hour12, minute,
                  meridiem);
    return buf;
}

std::string format_datetime(SimClock::TimePoint tp) {
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss hms{tp - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()));
    return buf;
}

std::string SimClock::iso_minutes() const { return format_datetime(sim_time()); }

SimClock::TimePoint parse_datetime(const std::string& text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    char sep = ' ';
    if (std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d", &y, &mo, &d, &sep, &h, &mi) != 6 ||
        (sep != ' ' && sep != 'T'))
        throw SimError(ErrorCode::InvalidInput, "expected YYYY-MM-DD HH:MM, got '" + text + "'");
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59)
        throw SimError(ErrorCode::InvalidInput, "invalid date/time '" + text + "'");
    return sys_days{ymd} + hours(h) + minutes(mi);
}

void to_json(nlohmann::json& j, const SimClock& c) {
    j = nlohmann::json{{"round_index", c.round_index()},
                       {"start", format_datetime(c.start_time())},
                       {"round_seconds", c.round_duration().count()}};
}

void from_json(const nlohmann::json& j, SimClock& c) {
    c = SimClock(parse_datetime(j.at("start").get<std::string>()),
                 seconds(j.at("round_seconds").get<std::int64_t>()),
                 j.at("round_index").get<std::uint64_t>());
}

}  // namespace usersim
