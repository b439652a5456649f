#include "usersim/metrics/survey.hpp"

#include <algorithm>
#include <cctype>

#include "usersim/agent/action.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

const char* to_string(SurveyKind k) {
    return k == SurveyKind::Satisfaction ? "satisfaction" : "movie_score";
}

SurveyScore parse_survey_score(std::string_view answer) {
    SurveyScore out;
    std::size_t i = 0;
    while (i < answer.size() && !std::isdigit(static_cast<unsigned char>(answer[i]))) ++i;
    if (i == answer.size()) return out;
    bool negative = i > 0 && answer[i - 1] == '-';
    long long v = 0;
    while (i < answer.size() && std::isdigit(static_cast<unsigned char>(answer[i]))) {
        v = std::min<long long>(v * 10 + (answer[i] - '0'), 1000000);
        ++i;
    }
    if (negative) v = -v;
    const long long c = std::clamp<long long>(v, 1, 10);
    out.clamped = c != v;
    out.score = static_cast<int>(c);
    return out;
}

std::vector<ItemId> parse_selection(std::string_view answer, const std::vector<const Item*>& candidates) {
    std::vector<ItemId> out;
    for (const auto& m : angle_mentions(answer)) {
        const auto key = text::title_key(m);
        auto it = std::find_if(candidates.begin(), candidates.end(),
                               [&](const Item* c) { return text::title_key(c->title) == key; });
        if (it == candidates.end()) continue;
        if (std::find(out.begin(), out.end(), (*it)->id) == out.end()) out.push_back((*it)->id);
    }
    return out;
}

}  // namespace usersim
