#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "usersim/core/catalog.hpp"
#include "usersim/core/ids.hpp"

namespace usersim {

enum class SurveyKind { Satisfaction, MovieScore };
const char* to_string(SurveyKind k);

struct SurveyScore {
    std::optional<int> score;  // empty when no integer was found
    bool clamped = false;
};

/// First integer in the answer, clamped to [1, 10].
SurveyScore parse_survey_score(std::string_view answer);

struct SurveyResult {
    std::map<AgentId, int> scores;
    std::vector<AgentId> excluded;  // unparseable twice
    std::vector<std::string> warnings;
};

/// Titles from a "[SELECT]:: <A>; <B>" answer resolved against `candidates`
/// (unknown titles and duplicates dropped, order kept).
std::vector<ItemId> parse_selection(std::string_view answer, const std::vector<const Item*>& candidates);

}  // namespace usersim
