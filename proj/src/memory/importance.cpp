#include <algorithm>
#include <initializer_list>

#include "usersim/core/text.hpp"
#include "usersim/memory/memory.hpp"

namespace usersim {

namespace {

bool has_item_mention(std::string_view s) {
    auto open = s.find('<');
    return open != std::string_view::npos && s.find('>', open + 1) != std::string_view::npos;
}

bool any_of(const std::string& lower, std::initializer_list<std::string_view> words) {
    return std::any_of(words.begin(), words.end(),
                       [&](std::string_view w) { return lower.find(w) != std::string::npos; });
}

}  // namespace

double score_importance(std::string_view content) {
    const auto lower = text::to_lower(content);
    const bool item = has_item_mention(content);
    const bool navigation =
        any_of(lower, {"enters the recommend", "enters recommend", "enters the social", "enters social",
                       "leaves the recommend", "views the next page", "does nothing", "is browsing"});
    const bool heard = any_of(lower, {"heard", "on social media", "posted", "shared"});
    const bool social = any_of(lower, {"conversation", "chat", "posted", "post ", "said", "told"});
    const bool feeling =
        any_of(lower, {"love", "enjoy", "felt", "feel", "rated", "liked", "dull", "hated", "boring",
                       "captivating", "thought-provoking", "mind-blowing", "amazing", "disappoint"});

    double s = navigation ? 0.2 : 0.3;
    if (heard) s = std::max(s, 0.5);
    if (item) s = std::max(s, 0.6);
    if (item && social) s = std::max(s, 0.7);
    if (item && feeling) s = std::max(s, 0.8);
    return s;
}

}  // namespace usersim
