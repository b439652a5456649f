#pragma once

#include <string_view>

#include "usersim/llm/port.hpp"

namespace usersim {

/// Signed feature hashing over lowercase word unigrams and bigrams, L2-normalized.
class HashEmbedder {
public:
    explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {}

    EmbeddingVector embed(std::string_view text) const;
    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_;
};

}  // namespace usersim
