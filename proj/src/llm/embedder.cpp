#include "usersim/llm/embedder.hpp"

#include <cmath>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/core/text.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim() || a.dim() == 0) return 0.0;
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string LlmPort::complete(const CompletionRequest& request) {
    if (text::trim(request.prompt).empty()) throw SimError(ErrorCode::InvalidInput, "empty prompt");
    if (request.max_tokens <= 0) throw SimError(ErrorCode::InvalidInput, "max_tokens must be positive");
    if (request.temperature < 0) throw SimError(ErrorCode::InvalidInput, "negative temperature");
    if (determinism_ && request.temperature != 0.0)
        throw SimError(ErrorCode::InvalidInput, "determinism mode requires temperature 0");
    return do_complete(request);
}

std::string LlmPort::complete(std::string prompt, int max_tokens) {
    CompletionRequest req;
    req.prompt = std::move(prompt);
    req.max_tokens = max_tokens;
    req.temperature = default_temperature();
    return complete(req);
}

EmbeddingVector LlmPort::embed(std::string_view text_in) {
    if (text::trim(text_in).empty()) throw SimError(ErrorCode::InvalidInput, "cannot embed empty text");
    auto v = do_embed(text_in);
    if (v.dim() != embed_dim())
        throw SimError(ErrorCode::MalformedResponse, "embedding dimension " + std::to_string(v.dim()) +
                                                         " != configured " + std::to_string(embed_dim()));
    for (double x : v.values)
        if (!std::isfinite(x)) throw SimError(ErrorCode::MalformedResponse, "non-finite embedding entry");
    return v;
}

EmbeddingVector HashEmbedder::embed(std::string_view input) const {
    EmbeddingVector out;
    out.values.assign(dim_, 0.0);
    auto add = [&](std::string_view feature) {
        const auto h = mix64(hash_text(feature));
        const double sign = (h >> 63) ? -1.0 : 1.0;
        out.values[(h & 0x7fffffffffffffffULL) % dim_] += sign;
    };
    const auto tokens = text::word_tokens(input);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add(tokens[i]);
        if (i + 1 < tokens.size()) add(tokens[i] + " " + tokens[i + 1]);
    }
    double norm = 0;
    for (double x : out.values) norm += x * x;
    if (norm == 0) {
        // no word tokens, or every feature cancelled; fall back to the raw text
        out.values.assign(dim_, 0.0);
        out.values[mix64(hash_text(input)) % dim_] = 1.0;
        return out;
    }
    norm = std::sqrt(norm);
    for (double& x : out.values) x /= norm;
    return out;
}

}  // namespace usersim
