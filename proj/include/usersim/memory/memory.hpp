#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "usersim/core/clock.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/llm/port.hpp"

namespace usersim {

using RecordId = std::uint64_t;

enum class MemoryTier { Short, Long };
enum class MemoryKind { Observation, Insight };

const char* to_string(MemoryTier tier);
const char* to_string(MemoryKind kind);

/// Content, importance and timestamp plus the bookkeeping the tiers need.
struct MemoryRecord {
    RecordId id = 0;
    std::string content;
    double importance = 0.0;
    SimClock timestamp;
    EmbeddingVector embedding;
    std::vector<RecordId> enhancers;
    MemoryTier tier = MemoryTier::Short;
    MemoryKind kind = MemoryKind::Observation;

    std::size_t enhance_count() const noexcept { return enhancers.size(); }
    bool operator==(const MemoryRecord&) const = default;
};

struct MemoryConfig {
    double similarity_threshold = 0.75;  // theta
    int promotion_count = 3;             // K
    int retrieval_top_n = 5;             // N
    double beta = 2.0;
    double delta = 0.2;
    int recency_window = 20;             // rounds until recency reaches 0
    double reflection_merge_threshold = 0.9;
    int reflection_period = 5;           // rounds between reflections, 0 disables
    int reflection_sources = 5;          // long-term records fed to a reflection
    std::size_t long_term_capacity = 512;
    std::size_t short_term_capacity = 32;
    std::size_t compression_cap = 600;   // characters

    /// Throws SimError(ConfigInvalid) when a field is out of range.
    void validate() const;
    bool operator==(const MemoryConfig&) const = default;
};

struct ScoredRecord {
    MemoryRecord record;
    double similarity = 0.0;
};

struct MemoryReadout {
    std::vector<MemoryRecord> short_term_all;  // insertion order
    std::vector<ScoredRecord> long_term_top;   // similarity desc, t desc, id asc

    /// Both tiers joined into prompt text, long-term first.
    std::string long_term_text() const;
    std::string short_term_text() const;
};

/// One agent's short- and long-term stores. Ids are unique across both tiers.
struct MemoryStores {
    MemoryConfig config;
    std::vector<MemoryRecord> short_term;
    std::vector<MemoryRecord> long_term;
    RecordId next_id = 1;

    const MemoryRecord* find(RecordId id) const;
    bool operator==(const MemoryStores&) const = default;
};

struct EnhancementEvent {
    RecordId enhanced;
    RecordId by;
    double similarity;
};

struct Promotion {
    MemoryRecord specific;
    std::optional<MemoryRecord> insight;  // empty when insight generation failed
};

struct ObserveResult {
    MemoryRecord record;
    std::vector<EnhancementEvent> enhancements;
    std::vector<Promotion> promotions;
    std::vector<RecordId> evicted;
    std::vector<std::string> warnings;
};

/// Deterministic rubric; the maximum over every rule the content matches.
double score_importance(std::string_view content);

std::string compression_prompt(std::string_view raw);
std::string insight_prompt(const MemoryRecord& record, const std::vector<const MemoryRecord*>& enhancers);
std::string reflection_prompt(const std::vector<const MemoryRecord*>& sources);

/// One-sentence summary through the port, truncated to `cap` characters at a
/// sentence (else word) boundary. Truncation appends a note to `warnings`.
std::string compress_observation(LlmPort& port, std::string_view raw, std::size_t cap,
                                 std::vector<std::string>* warnings = nullptr);

/// Compresses, scores and embeds `raw`; the result is not yet in any store.
MemoryRecord sensory_ingest(MemoryStores& stores, LlmPort& port, std::string_view raw, const SimClock& clock,
                            std::vector<std::string>* warnings = nullptr);

/// Enhances every stored short-term record with similarity >= theta, then appends
/// the record. Oldest records beyond short_term_capacity are dropped (ids in `evicted`).
std::vector<EnhancementEvent> short_term_insert(MemoryStores& stores, MemoryRecord record,
                                                std::vector<RecordId>* evicted = nullptr);

/// Moves a record with at least K enhancements to long-term along with a
/// generated insight. Throws PreconditionViolation below K.
Promotion promote_to_long_term(MemoryStores& stores, LlmPort& port, RecordId id, const SimClock& clock,
                               std::vector<std::string>* warnings = nullptr);

/// ingest + insert + promote every record that reached K.
ObserveResult observe(MemoryStores& stores, LlmPort& port, std::string_view raw, const SimClock& clock);

double recency(const MemoryRecord& record, const SimClock& now, int recency_window);
/// g = 1 - ((s + r) / 2) * max(r^beta, delta)
double forgetting_g(double importance, double recency, double beta, double delta);
double forgetting_probability(const MemoryRecord& record, const SimClock& now, const MemoryConfig& config);

/// One sweep over long-term memory in id order; each record is removed with probability g.
std::vector<RecordId> apply_forgetting(MemoryStores& stores, const SimClock& now, Rng& rng);

MemoryReadout read_memory(const MemoryStores& stores, LlmPort& port, std::string_view query);

/// Generates one insight from the strongest long-term records and merges
/// near-duplicate insights. Returns the insights that were added.
std::vector<MemoryRecord> reflect(MemoryStores& stores, LlmPort& port, const SimClock& clock,
                                  std::vector<std::string>* warnings = nullptr);

/// Merges insight pairs with cosine >= reflection_merge_threshold. Returns removed ids.
std::vector<RecordId> merge_similar_insights(MemoryStores& stores);

void to_json(nlohmann::json& j, const MemoryRecord& r);
void from_json(const nlohmann::json& j, MemoryRecord& r);
void to_json(nlohmann::json& j, const MemoryConfig& c);
void from_json(const nlohmann::json& j, MemoryConfig& c);
void to_json(nlohmann::json& j, const MemoryStores& s);
void from_json(const nlohmann::json& j, MemoryStores& s);

/// One JSON object per record per line, short-term first.
std::string memory_debug_dump(const MemoryStores& stores, const SimClock& now);

}  // namespace usersim
