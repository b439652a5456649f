#pragma once

#include <optional>
#include <string>
#include <vector>

#include "usersim/core/catalog.hpp"
#include "usersim/core/clock.hpp"
#include "usersim/memory/memory.hpp"

namespace usersim {

/// The four prompt parts. Only `context` may be empty.
struct PromptBundle {
    std::string profile_summary;
    std::string memory_text;
    std::string instruction;
    std::string context;

    bool operator==(const PromptBundle&) const = default;
};

/// profile_summary, context, memory_text, instruction, separated by blank lines.
std::string build_prompt(const PromptBundle& bundle);

/// What one agent contributes to a prompt.
struct AgentPromptView {
    std::string name;
    int age = 0;
    std::string summary;
    std::vector<std::string> heard;    // most recent last
    std::vector<std::string> watched;  // most recent last
    MemoryReadout readout;
};

/// "Name: X (age: N)\n<summary>" blocks for one or two agents.
std::string render_profile_block(const std::vector<const AgentPromptView*>& agents);
/// Clock line plus heard/watched lines for each agent.
std::string render_context(const SimClock& clock, const std::vector<const AgentPromptView*>& agents);
/// Long-term and short-term memory lines; "of <name>" labels when several agents are present.
std::string render_memory(const std::vector<const AgentPromptView*>& agents);

/// Keeps the last `n` distinct titles, most recent last.
std::vector<std::string> recent_unique(const std::vector<std::string>& titles, std::size_t n);

/// "1. <Title>||description" lines.
std::string render_item_list(const std::vector<const Item*>& items);

PromptBundle single_agent_bundle(const AgentPromptView& a, const SimClock& clock, std::string instruction);
PromptBundle two_agent_bundle(const AgentPromptView& a, const AgentPromptView& b, const SimClock& clock,
                              std::string instruction);

// Instruction texts (observation + suffix).
std::string take_action_instruction(const std::string& name);
std::string recommender_instruction(const std::string& name, const std::vector<const Item*>& page,
                                    const std::string& search_query);
std::string feeling_instruction(const std::string& name, const Item& item);
std::string dialogue_instruction(const std::string& a, const std::string& b);
std::string post_instruction(const std::string& name);
std::string interview_instruction(const std::string& name, const std::string& question);
std::string movie_score_instruction(const std::string& name, const std::string& title,
                                    std::optional<int> previous_score);
std::string satisfaction_instruction(const std::string& name, const std::vector<const Item*>& items);
std::string selection_instruction(const std::string& name, const std::vector<const Item*>& candidates, int count);

}  // namespace usersim
