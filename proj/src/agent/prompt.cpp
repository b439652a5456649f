#include "usersim/agent/prompt.hpp"

#include <algorithm>
#include <sstream>

#include "usersim/core/text.hpp"
#include "usersim/llm/prompt_kind.hpp"

namespace usersim {

std::string build_prompt(const PromptBundle& b) {
    std::string out = b.profile_summary;
    for (const auto* part : {&b.context, &b.memory_text, &b.instruction}) {
        if (part->empty()) continue;
        out += "\n\n";
        out += *part;
    }
    return out;
}

std::vector<std::string> recent_unique(const std::vector<std::string>& titles, std::size_t n) {
    std::vector<std::string> out;
    for (auto it = titles.rbegin(); it != titles.rend() && out.size() < n; ++it) {
        const auto key = text::title_key(*it);
        if (std::none_of(out.begin(), out.end(), [&](const auto& t) { return text::title_key(t) == key; }))
            out.push_back(*it);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

namespace {

std::string bracket_list(const std::vector<std::string>& titles) {
    std::vector<std::string> wrapped;
    for (const auto& t : titles) wrapped.push_back("<" + t + ">");
    return "[" + text::join(wrapped, ", ") + "]";
}

constexpr std::size_t kRecentTitles = 10;

}  // namespace

std::string render_profile_block(const std::vector<const AgentPromptView*>& agents) {
    std::vector<std::string> blocks;
    for (const auto* a : agents)
        blocks.push_back("Name: " + a->name + " (age: " + std::to_string(a->age) + ")\n" + text::trim(a->summary));
    return text::join(blocks, "\n\n");
}

std::string render_context(const SimClock& clock, const std::vector<const AgentPromptView*>& agents) {
    std::ostringstream out;
    out << clock.prompt_line();
    for (const auto* a : agents) {
        const auto heard = recent_unique(a->heard, kRecentTitles);
        const auto watched = recent_unique(a->watched, kRecentTitles);
        out << "\n\n" << a->name << " recently heard " << (heard.empty() ? "nothing" : bracket_list(heard))
            << " on social media.\n";
        out << a->name << " recently watched " << (watched.empty() ? "nothing" : bracket_list(watched))
            << " on recommender system.";
        if (heard.empty() && watched.empty()) out << "\nOther than that " << a->name << " doesn't know any movies.";
    }
    return out.str();
}

std::string render_memory(const std::vector<const AgentPromptView*>& agents) {
    std::vector<std::string> lines;
    const bool labelled = agents.size() > 1;
    for (const auto* a : agents) {
        const std::string of = labelled ? " of " + a->name : "";
        const auto lt = text::normalize_space(a->readout.long_term_text());
        const auto st = text::normalize_space(a->readout.short_term_text());
        if (!lt.empty()) lines.push_back("Relevant long-term memories" + of + ": " + lt);
        lines.push_back("Most recent observations" + of + ": " + (st.empty() ? std::string("none.") : st));
    }
    return text::join(lines, "\n\n");
}

std::string render_item_list(const std::vector<const Item*>& items) {
    std::ostringstream out;
    int i = 1;
    for (const auto* item : items) {
        out << i++ << ". <" << item->title << ">||" << text::normalize_space(item->description);
        if (i <= static_cast<int>(items.size())) out << "\n";
    }
    return out.str();
}

PromptBundle single_agent_bundle(const AgentPromptView& a, const SimClock& clock, std::string instruction) {
    PromptBundle b;
    b.profile_summary = render_profile_block({&a});
    b.context = render_context(clock, {&a});
    b.memory_text = render_memory({&a});
    b.instruction = std::move(instruction);
    return b;
}

PromptBundle two_agent_bundle(const AgentPromptView& a, const AgentPromptView& bv, const SimClock& clock,
                              std::string instruction) {
    PromptBundle b;
    b.profile_summary = render_profile_block({&a, &bv});
    b.context = render_context(clock, {&a, &bv});
    b.memory_text = render_memory({&a, &bv});
    b.instruction = std::move(instruction);
    return b;
}

namespace {
constexpr const char* kEnclose = "All occurrences of movie names should be enclosed with <>.";
}

std::string take_action_instruction(const std::string& n) {
    std::ostringstream out;
    out << "Observation: " << n << " must take only ONE of the actions below:\n"
        << "(1) Enter the Recommender System. If so, " << n << " will be recommended some movies, from which " << n
        << " can watch some movies, or search for movies by themselves.\n"
        << "(2) Enter the Social Media. " << n << " can chat with friends or publish a post to all friends of " << n
        << ". If " << n << " recently watched some movies they might want to share with others.\n"
        << "(3) Do Nothing.\n\n"
        << kEnclose << "\n\n"
        << "What action would " << n << " like to take? Respond in one line.\n"
        << "If " << n << " wants to enter the Recommender System, write:\n[RECOMMENDER]:: " << n
        << " enters the Recommender System\n"
        << "If " << n << " wants to enter the Social Media, write:\n[SOCIAL]:: " << n << " enters the Social Media\n"
        << "If " << n << " wants to do nothing, write:\n[NOTHING]:: " << n << " does nothing";
    return out.str();
}

std::string recommender_instruction(const std::string& n, const std::vector<const Item*>& page,
                                    const std::string& search_query) {
    std::ostringstream out;
    out << "Observation: " << n << " is browsing the recommender system. ";
    if (!search_query.empty())
        out << n << " has searched for " << search_query
            << " in recommender system and recommender system returns item list:\n";
    else
        out << n << " is recommended the following movies:\n";
    out << render_item_list(page) << "\n\n";
    out << kEnclose << "\n\n";
    out << n << " must choose one of the four actions below:\n"
        << "(1) Watch ONLY ONE movie from the list returned by the recommender system.\n"
        << "(2) See the next page.\n"
        << "(3) Search for a specific item.\n"
        << "(4) Leave the recommender system.\n"
        << "If " << n << " has recently heard about a particular movie on social media, " << n
        << " might want to search for that movie on the recommender system.\n"
        << "To watch a movie from the recommended list, write: [BUY]:: ONLY ONE movie name||description.\n"
        << "To see the next page, write: [NEXT]:: " << n << " views the next page.\n"
        << "To search for a specific item, write: [SEARCH]:: single, specific movie name to search for.\n"
        << "To leave the recommender system, write: [LEAVE]:: " << n << " leaves the recommender system.";
    return out.str();
}

std::string feeling_instruction(const std::string& n, const Item& item) {
    std::ostringstream out;
    out << "Observation: " << n << " has just finished watching <" << item.title
        << ">;;" << text::normalize_space(item.description) << "\n\n"
        << kEnclose << "\n\n"
        << n << ", how did you feel about the movie you just watched? Describe your feelings in one line. "
        << "NOTE: Please answer in the first-person perspective.";
    return out.str();
}

std::string dialogue_instruction(const std::string& a, const std::string& b) {
    std::ostringstream out;
    out << "Observation: " << a << " is chatting with " << b << ".\n\n"
        << kEnclose << "\n\n"
        << "What will be said between " << a << " and " << b << "? " << a
        << " initiates the conversation first. Please simulate their conversation.\n"
        << a << " and " << b << " should not say anything about movies they have not watched or heard about.\n"
        << "Write the dialogue in the following format:\n[" << a << "]:\n[" << b << "]:";
    return out.str();
}

std::string post_instruction(const std::string& n) {
    std::ostringstream out;
    out << "Observation: " << n << " want to post for all acquaintances.\n\n"
        << kEnclose << "\n\n"
        << "Posts should be related to recent watched movies on recommender systems. " << n
        << " should not say anything about movies that have not watched or heard about.\n"
        << "If you were " << n << ", what will you post? Respond in one line.";
    return out.str();
}

std::string interview_instruction(const std::string& n, const std::string& question) {
    std::ostringstream out;
    out << "Observation: An interviewer asks " << n << ": \"" << text::normalize_space(question) << "\"\n\n"
        << kEnclose << "\n\n"
        << "If you were " << n << ", answer the interviewer's question in the first person. Respond in one line.";
    return out.str();
}

std::string movie_score_instruction(const std::string& n, const std::string& title, std::optional<int> previous) {
    std::ostringstream out;
    out << "Observation: A survey asks " << n << " about a movie.\n";
    if (previous) out << "Your previous score for <" << title << "> was " << *previous << "/10.\n";
    out << "\n" << n << ", please score the movie <" << title
        << "> on a scale from 1 to 10.\nRespond with a single integer from 1 to 10 and nothing else.";
    return out.str();
}

std::string satisfaction_instruction(const std::string& n, const std::vector<const Item*>& items) {
    std::ostringstream out;
    out << "Observation: " << n << " was recommended the following movies:\n" << render_item_list(items) << "\n\n"
        << n << ", please rate your satisfaction with the recommendations on a scale from 1 to 10.\n"
        << "Respond with a single integer from 1 to 10 and nothing else.";
    return out.str();
}

std::string selection_instruction(const std::string& n, const std::vector<const Item*>& candidates, int count) {
    std::ostringstream out;
    out << "Observation: " << n << " is shown the following movies:\n" << render_item_list(candidates) << "\n\n"
        << n << ", please select exactly " << count << " movies you would most like to watch.\n"
        << "Write: [SELECT]:: <movie name>; <movie name>";
    return out.str();
}

}  // namespace usersim
