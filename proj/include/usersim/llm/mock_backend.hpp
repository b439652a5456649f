#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "usersim/core/catalog.hpp"
#include "usersim/llm/embedder.hpp"
#include "usersim/llm/port.hpp"
#include "usersim/llm/prompt_kind.hpp"

namespace usersim {

/// Everything the mock policy consults besides the request itself. It is fixed
/// at construction, so outputs are a pure function of (state, request).
struct MockPolicyState {
    std::uint64_t seed = 42;
    /// Optional per-agent (by display name) category weights in [0,1]; when absent
    /// the weights derive from the interests stated in the prompt plus seeded jitter.
    std::map<std::string, std::map<std::string, double>> preference_weights;
    /// Named response templates; placeholders are {name}, {item}, {interest}, {score}, ...
    std::map<std::string, std::string> templates = default_templates();

    static std::map<std::string, std::string> default_templates();
};

/// Deterministic stand-in for a chat model: detects the prompt family from its
/// instruction marker and answers in that family's output grammar.
class MockBackend final : public LlmPort {
public:
    explicit MockBackend(MockPolicyState state = {}, std::shared_ptr<const ItemCatalog> catalog = nullptr,
                         std::size_t embed_dim = 256);

    std::size_t embed_dim() const override { return embedder_.dim(); }
    std::string name() const override { return "mock"; }
    const MockPolicyState& state() const noexcept { return state_; }

    /// Category weight the policy uses for `agent` (exposed for tests and fixtures).
    double preference(const std::string& agent, const std::vector<std::string>& interests,
                      const std::string& category) const;

protected:
    std::string do_complete(const CompletionRequest& request) override;
    EmbeddingVector do_embed(std::string_view text) override { return embedder_.embed(text); }

private:
    MockPolicyState state_;
    std::shared_ptr<const ItemCatalog> catalog_;
    HashEmbedder embedder_;
};

/// Helpers shared between the mock policy and tests that need to read the
/// opinion clauses ("<name> rated <title> N/10") the mock writes into memories.
struct OpinionMention {
    std::string speaker;
    std::string title;
    int score = 0;
};
std::vector<OpinionMention> extract_opinions(std::string_view text);

}  // namespace usersim
