#pragma once

#include <string_view>

namespace usersim {

/// Instruction phrases that identify each prompt family. The prompt builders
/// embed these verbatim; the mock backend keys its policy table off them.
namespace markers {
inline constexpr std::string_view kCompress = "summarize the above observation(s) into one independent sentence";
inline constexpr std::string_view kInsight = "infer from the above memories the high-level insight";
inline constexpr std::string_view kProfileSummary = "please summarize the relevant details from";
inline constexpr std::string_view kProfileComplete = "continue to complete the user profile";
inline constexpr std::string_view kTakeAction = "must take only ONE of the actions below";
inline constexpr std::string_view kRecommenderAction = "must choose one of the four actions below";
inline constexpr std::string_view kFeeling = "how did you feel about the movie you just watched";
inline constexpr std::string_view kDialogue = "Please simulate their conversation";
inline constexpr std::string_view kPost = "what will you post?";
inline constexpr std::string_view kInterview = "answer the interviewer's question";
inline constexpr std::string_view kMovieScore = "score the movie";
inline constexpr std::string_view kSatisfaction = "rate your satisfaction with the recommendations";
inline constexpr std::string_view kSelection = "select exactly";
inline constexpr std::string_view kRetry = "Your previous answer did not follow the required format.";
}  // namespace markers

enum class PromptKind {
    Unknown,
    Compress,
    Insight,
    ProfileSummary,
    ProfileComplete,
    TakeAction,
    RecommenderAction,
    Feeling,
    Dialogue,
    Post,
    Interview,
    MovieScore,
    Satisfaction,
    Selection,
};

/// The marker occurring last in the prompt wins: instructions always follow the
/// profile/memory sections, which may quote arbitrary earlier text.
PromptKind detect_prompt_kind(std::string_view prompt);
const char* to_string(PromptKind kind);

}  // namespace usersim
