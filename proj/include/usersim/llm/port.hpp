#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace usersim {

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 512;
    double temperature = 0.0;
    std::vector<std::string> stop_markers;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Text completion + embedding behind one interface. complete() and embed()
/// validate their inputs here and hand off to the backend.
class LlmPort {
public:
    virtual ~LlmPort() = default;

    std::string complete(const CompletionRequest& request);
    EmbeddingVector embed(std::string_view text);

    /// Determinism mode requires temperature 0 on every request.
    void set_determinism(bool on) noexcept { determinism_ = on; }
    bool determinism() const noexcept { return determinism_; }
    double default_temperature() const noexcept { return determinism_ ? 0.0 : default_temperature_; }
    void set_default_temperature(double t) noexcept { default_temperature_ = t; }

    /// Convenience for callers that only have a prompt.
    std::string complete(std::string prompt, int max_tokens = 512);

    virtual std::size_t embed_dim() const = 0;
    virtual std::string name() const = 0;

protected:
    virtual std::string do_complete(const CompletionRequest& request) = 0;
    virtual EmbeddingVector do_embed(std::string_view text) = 0;

private:
    bool determinism_ = true;
    double default_temperature_ = 0.7;
};

}  // namespace usersim
