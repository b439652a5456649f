#include <algorithm>
#include <cmath>
#include <sstream>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/memory/memory.hpp"

namespace usersim {

using nlohmann::json;

const char* to_string(MemoryTier tier) { return tier == MemoryTier::Short ? "short" : "long"; }
const char* to_string(MemoryKind kind) { return kind == MemoryKind::Observation ? "observation" : "insight"; }

void MemoryConfig::validate() const {
    auto fail = [](const std::string& what) { throw SimError(ErrorCode::ConfigInvalid, "memory." + what); };
    if (!(similarity_threshold > 0 && similarity_threshold < 1)) fail("similarity_threshold must be in (0,1)");
    if (promotion_count < 1) fail("promotion_count must be positive");
    if (retrieval_top_n < 1) fail("retrieval_top_n must be positive");
    if (!(beta > 1)) fail("beta must be > 1");
    if (!(delta > 0 && delta < 1)) fail("delta must be in (0,1)");
    if (recency_window < 1) fail("recency_window must be positive");
    if (!(reflection_merge_threshold > 0 && reflection_merge_threshold < 1))
        fail("reflection_merge_threshold must be in (0,1)");
    if (reflection_period < 0) fail("reflection_period must be >= 0");
    if (reflection_sources < 1) fail("reflection_sources must be positive");
    if (long_term_capacity < 1) fail("long_term_capacity must be positive");
    if (short_term_capacity < 1) fail("short_term_capacity must be positive");
    if (compression_cap < 16) fail("compression_cap must be >= 16");
}

const MemoryRecord* MemoryStores::find(RecordId id) const {
    for (const auto* tier : {&short_term, &long_term})
        for (const auto& r : *tier)
            if (r.id == id) return &r;
    return nullptr;
}

std::string MemoryReadout::long_term_text() const {
    std::vector<std::string> parts;
    for (const auto& s : long_term_top) parts.push_back(s.record.content);
    return text::join(parts, " ");
}

std::string MemoryReadout::short_term_text() const {
    std::vector<std::string> parts;
    for (const auto& r : short_term_all) parts.push_back(r.content);
    return text::join(parts, " ");
}

std::string compression_prompt(std::string_view raw) {
    return "The observations are as following: " + std::string(raw) +
           ". You should summarize the above observation(s) into one independent sentence. If there is a "
           "person's name in the observation, use third person, otherwise use first person. Note that the "
           "sentence should pay more attention to the movie interest and the reasons in the observations. The "
           "summarization should not include the profile explicitly.";
}

namespace {

constexpr std::string_view kInsightSuffix =
    "Can you infer from the above memories the high-level insight for this person's character?\n"
    "The insight needs to be significantly different from the content and structure of the original memories.\n"
    "Respond in one sentence. Response in one line.";

std::string one_line(std::string_view s) { return text::normalize_space(s); }

}  // namespace

std::string insight_prompt(const MemoryRecord& record, const std::vector<const MemoryRecord*>& enhancers) {
    std::ostringstream out;
    out << "There are some memories:\nMR: " << one_line(record.content) << "\nOB:\n";
    int i = 1;
    for (const auto* e : enhancers) out << i++ << ". " << one_line(e->content) << "\n";
    out << kInsightSuffix;
    return out.str();
}

std::string reflection_prompt(const std::vector<const MemoryRecord*>& sources) {
    std::ostringstream out;
    out << "There are some memories:\n";
    int i = 1;
    for (const auto* s : sources) out << i++ << ". " << one_line(s->content) << "\n";
    out << kInsightSuffix;
    return out.str();
}

std::string compress_observation(LlmPort& port, std::string_view raw, std::size_t cap,
                                 std::vector<std::string>* warnings) {
    if (text::trim(raw).empty()) throw SimError(ErrorCode::InvalidInput, "empty observation");
    auto out = one_line(port.complete(compression_prompt(raw)));
    if (out.empty()) throw SimError(ErrorCode::MalformedResponse, "empty compression");
    if (out.size() <= cap) return out;
    std::size_t cut = std::string::npos;
    for (std::size_t i = cap; i > 0; --i) {
        const char c = out[i - 1];
        if ((c == '.' || c == '!' || c == '?') && (i == out.size() || out[i] == ' ')) {
            cut = i;
            break;
        }
    }
    std::string trimmed;
    if (cut != std::string::npos && cut > cap / 4) {
        trimmed = out.substr(0, cut);
    } else {
        auto space = out.rfind(' ', cap - 1);
        trimmed = out.substr(0, space == std::string::npos || space == 0 ? cap - 1 : space);
        while (!trimmed.empty() && (std::ispunct(static_cast<unsigned char>(trimmed.back())) &&
                                    trimmed.back() != '>'))
            trimmed.pop_back();
        trimmed += ".";
    }
    if (warnings)
        warnings->push_back("compression truncated from " + std::to_string(out.size()) + " to " +
                            std::to_string(trimmed.size()) + " characters");
    return trimmed;
}

MemoryRecord sensory_ingest(MemoryStores& stores, LlmPort& port, std::string_view raw, const SimClock& clock,
                            std::vector<std::string>* warnings) {
    MemoryRecord r;
    r.content = compress_observation(port, raw, stores.config.compression_cap, warnings);
    r.importance = score_importance(r.content);
    r.timestamp = clock;
    r.embedding = port.embed(r.content);
    r.tier = MemoryTier::Short;
    r.kind = MemoryKind::Observation;
    r.id = stores.next_id++;
    return r;
}

std::vector<EnhancementEvent> short_term_insert(MemoryStores& stores, MemoryRecord record,
                                                std::vector<RecordId>* evicted) {
    if (record.tier != MemoryTier::Short)
        throw SimError(ErrorCode::PreconditionViolation, "short_term_insert needs a short-tier record");
    std::vector<EnhancementEvent> events;
    for (auto& stored : stores.short_term) {
        const double sim = cosine(stored.embedding, record.embedding);
        if (sim >= stores.config.similarity_threshold) {
            stored.enhancers.push_back(record.id);
            events.push_back({stored.id, record.id, sim});
        }
    }
    stores.next_id = std::max(stores.next_id, record.id + 1);
    stores.short_term.push_back(std::move(record));
    while (stores.short_term.size() > stores.config.short_term_capacity) {
        if (evicted) evicted->push_back(stores.short_term.front().id);
        stores.short_term.erase(stores.short_term.begin());
    }
    return events;
}

namespace {

/// Keeps long-term within capacity by dropping the record most likely to be forgotten.
void enforce_capacity(MemoryStores& stores, const SimClock& now) {
    while (stores.long_term.size() > stores.config.long_term_capacity) {
        auto worst = stores.long_term.begin();
        double worst_g = -1;
        for (auto it = stores.long_term.begin(); it != stores.long_term.end(); ++it) {
            const double g = forgetting_probability(*it, now, stores.config);
            if (g > worst_g || (g == worst_g && it->id < worst->id)) {
                worst_g = g;
                worst = it;
            }
        }
        stores.long_term.erase(worst);
    }
}

}  // namespace

Promotion promote_to_long_term(MemoryStores& stores, LlmPort& port, RecordId id, const SimClock& clock,
                               std::vector<std::string>* warnings) {
    auto it = std::find_if(stores.short_term.begin(), stores.short_term.end(),
                           [&](const MemoryRecord& r) { return r.id == id; });
    if (it == stores.short_term.end())
        throw SimError(ErrorCode::PreconditionViolation, "record " + std::to_string(id) + " is not in short-term");
    if (static_cast<int>(it->enhance_count()) < stores.config.promotion_count)
        throw SimError(ErrorCode::PreconditionViolation,
                       "record " + std::to_string(id) + " has " + std::to_string(it->enhance_count()) +
                           " enhancements, needs " + std::to_string(stores.config.promotion_count));

    std::vector<const MemoryRecord*> enhancers;
    double importance = it->importance;
    for (auto eid : it->enhancers) {
        if (const auto* e = stores.find(eid)) {
            enhancers.push_back(e);
            importance = std::max(importance, e->importance);
        }
    }

    Promotion result;
    try {
        auto content = one_line(port.complete(insight_prompt(*it, enhancers)));
        if (text::istarts_with(content, "Insight:")) content = text::trim(content.substr(8));
        if (content.empty()) throw SimError(ErrorCode::MalformedResponse, "empty insight");
        MemoryRecord insight;
        insight.content = std::move(content);
        insight.importance = importance;
        insight.timestamp = clock;
        insight.embedding = port.embed(insight.content);
        insight.enhancers = it->enhancers;
        insight.tier = MemoryTier::Long;
        insight.kind = MemoryKind::Insight;
        result.insight = std::move(insight);
    } catch (const SimError& e) {
        if (warnings) warnings->push_back(std::string("insight generation failed: ") + e.what());
    }

    result.specific = std::move(*it);
    result.specific.tier = MemoryTier::Long;
    stores.short_term.erase(it);
    stores.long_term.push_back(result.specific);
    if (result.insight) {
        result.insight->id = stores.next_id++;
        stores.long_term.push_back(*result.insight);
    }
    enforce_capacity(stores, clock);
    return result;
}

ObserveResult observe(MemoryStores& stores, LlmPort& port, std::string_view raw, const SimClock& clock) {
    ObserveResult out;
    out.record = sensory_ingest(stores, port, raw, clock, &out.warnings);
    out.enhancements = short_term_insert(stores, out.record, &out.evicted);
    std::vector<RecordId> ready;
    for (const auto& ev : out.enhancements) {
        const auto* r = stores.find(ev.enhanced);
        if (r && r->tier == MemoryTier::Short && static_cast<int>(r->enhance_count()) == stores.config.promotion_count)
            ready.push_back(r->id);
    }
    for (auto id : ready) out.promotions.push_back(promote_to_long_term(stores, port, id, clock, &out.warnings));
    return out;
}

double recency(const MemoryRecord& record, const SimClock& now, int recency_window) {
    const double age = static_cast<double>(now.round_index()) - static_cast<double>(record.timestamp.round_index());
    return std::clamp(1.0 - std::max(0.0, age) / recency_window, 0.0, 1.0);
}

double forgetting_g(double s, double r, double beta, double delta) {
    const double g = 1.0 - ((s + r) / 2.0) * std::max(std::pow(r, beta), delta);
    return std::clamp(g, 0.0, 1.0);
}

double forgetting_probability(const MemoryRecord& record, const SimClock& now, const MemoryConfig& config) {
    return forgetting_g(record.importance, recency(record, now, config.recency_window), config.beta, config.delta);
}

std::vector<RecordId> apply_forgetting(MemoryStores& stores, const SimClock& now, Rng& rng) {
    std::sort(stores.long_term.begin(), stores.long_term.end(),
              [](const MemoryRecord& a, const MemoryRecord& b) { return a.id < b.id; });
    std::vector<RecordId> removed;
    std::vector<MemoryRecord> kept;
    for (auto& r : stores.long_term) {
        const double g = forgetting_probability(r, now, stores.config);
        if (uniform01(rng) < g)
            removed.push_back(r.id);
        else
            kept.push_back(std::move(r));
    }
    stores.long_term = std::move(kept);
    return removed;
}

MemoryReadout read_memory(const MemoryStores& stores, LlmPort& port, std::string_view query) {
    if (text::trim(query).empty()) throw SimError(ErrorCode::InvalidInput, "empty memory query");
    MemoryReadout out;
    out.short_term_all = stores.short_term;
    if (stores.long_term.empty()) return out;
    const auto q = port.embed(query);
    std::vector<ScoredRecord> scored;
    scored.reserve(stores.long_term.size());
    for (const auto& r : stores.long_term) scored.push_back({r, cosine(q, r.embedding)});
    std::sort(scored.begin(), scored.end(), [](const ScoredRecord& a, const ScoredRecord& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.record.timestamp.round_index() != b.record.timestamp.round_index())
            return a.record.timestamp.round_index() > b.record.timestamp.round_index();
        return a.record.id < b.record.id;
    });
    if (scored.size() > static_cast<std::size_t>(stores.config.retrieval_top_n))
        scored.resize(static_cast<std::size_t>(stores.config.retrieval_top_n));
    out.long_term_top = std::move(scored);
    return out;
}

std::vector<RecordId> merge_similar_insights(MemoryStores& stores) {
    std::vector<RecordId> removed;
    auto& lt = stores.long_term;
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < lt.size() && !merged; ++i) {
            if (lt[i].kind != MemoryKind::Insight) continue;
            for (std::size_t j = i + 1; j < lt.size() && !merged; ++j) {
                if (lt[j].kind != MemoryKind::Insight) continue;
                if (cosine(lt[i].embedding, lt[j].embedding) < stores.config.reflection_merge_threshold) continue;
                // keep the more important one, the older id on ties
                bool keep_i = lt[i].importance > lt[j].importance ||
                              (lt[i].importance == lt[j].importance && lt[i].id < lt[j].id);
                auto& keep = keep_i ? lt[i] : lt[j];
                auto& drop = keep_i ? lt[j] : lt[i];
                for (auto e : drop.enhancers)
                    if (std::find(keep.enhancers.begin(), keep.enhancers.end(), e) == keep.enhancers.end())
                        keep.enhancers.push_back(e);
                removed.push_back(drop.id);
                lt.erase(lt.begin() + static_cast<std::ptrdiff_t>(keep_i ? j : i));
                merged = true;
            }
        }
    }
    return removed;
}

std::vector<MemoryRecord> reflect(MemoryStores& stores, LlmPort& port, const SimClock& clock,
                                  std::vector<std::string>* warnings) {
    std::vector<MemoryRecord> added;
    if (stores.long_term.empty()) return added;
    std::vector<const MemoryRecord*> ranked;
    for (const auto& r : stores.long_term) ranked.push_back(&r);
    const int window = stores.config.recency_window;
    std::sort(ranked.begin(), ranked.end(), [&](const MemoryRecord* a, const MemoryRecord* b) {
        const double sa = a->importance + recency(*a, clock, window);
        const double sb = b->importance + recency(*b, clock, window);
        if (sa != sb) return sa > sb;
        return a->id > b->id;
    });
    if (ranked.size() > static_cast<std::size_t>(stores.config.reflection_sources))
        ranked.resize(static_cast<std::size_t>(stores.config.reflection_sources));
    std::sort(ranked.begin(), ranked.end(), [](auto* a, auto* b) { return a->id < b->id; });

    MemoryRecord insight;
    try {
        insight.content = one_line(port.complete(reflection_prompt(ranked)));
        if (text::istarts_with(insight.content, "Insight:")) insight.content = text::trim(insight.content.substr(8));
        if (insight.content.empty()) throw SimError(ErrorCode::MalformedResponse, "empty reflection");
        insight.embedding = port.embed(insight.content);
    } catch (const SimError& e) {
        if (warnings) warnings->push_back(std::string("reflection failed: ") + e.what());
        return added;
    }
    double importance = 0;
    for (const auto* r : ranked) {
        importance = std::max(importance, r->importance);
        insight.enhancers.push_back(r->id);
    }
    insight.importance = importance;
    insight.timestamp = clock;
    insight.tier = MemoryTier::Long;
    insight.kind = MemoryKind::Insight;
    insight.id = stores.next_id++;
    stores.long_term.push_back(insight);
    const auto removed = merge_similar_insights(stores);
    if (std::find(removed.begin(), removed.end(), insight.id) == removed.end()) added.push_back(insight);
    enforce_capacity(stores, clock);
    return added;
}

void to_json(json& j, const MemoryRecord& r) {
    j = json{{"id", r.id},
             {"content", r.content},
             {"importance", r.importance},
             {"timestamp", r.timestamp},
             {"embedding", r.embedding.values},
             {"enhancers", r.enhancers},
             {"tier", to_string(r.tier)},
             {"kind", to_string(r.kind)}};
}

void from_json(const json& j, MemoryRecord& r) {
    r.id = j.at("id").get<RecordId>();
    r.content = j.at("content").get<std::string>();
    r.importance = j.at("importance").get<double>();
    r.timestamp = j.at("timestamp").get<SimClock>();
    r.embedding.values = j.at("embedding").get<std::vector<double>>();
    r.enhancers = j.at("enhancers").get<std::vector<RecordId>>();
    r.tier = j.at("tier").get<std::string>() == "long" ? MemoryTier::Long : MemoryTier::Short;
    r.kind = j.at("kind").get<std::string>() == "insight" ? MemoryKind::Insight : MemoryKind::Observation;
}

void to_json(json& j, const MemoryConfig& c) {
    j = json{{"similarity_threshold", c.similarity_threshold},
             {"promotion_count", c.promotion_count},
             {"retrieval_top_n", c.retrieval_top_n},
             {"beta", c.beta},
             {"delta", c.delta},
             {"recency_window", c.recency_window},
             {"reflection_merge_threshold", c.reflection_merge_threshold},
             {"reflection_period", c.reflection_period},
             {"reflection_sources", c.reflection_sources},
             {"long_term_capacity", c.long_term_capacity},
             {"short_term_capacity", c.short_term_capacity},
             {"compression_cap", c.compression_cap}};
}

void from_json(const json& j, MemoryConfig& c) {
    MemoryConfig d;
    c.similarity_threshold = j.value("similarity_threshold", d.similarity_threshold);
    c.promotion_count = j.value("promotion_count", d.promotion_count);
    c.retrieval_top_n = j.value("retrieval_top_n", d.retrieval_top_n);
    c.beta = j.value("beta", d.beta);
    c.delta = j.value("delta", d.delta);
    c.recency_window = j.value("recency_window", d.recency_window);
    c.reflection_merge_threshold = j.value("reflection_merge_threshold", d.reflection_merge_threshold);
    c.reflection_period = j.value("reflection_period", d.reflection_period);
    c.reflection_sources = j.value("reflection_sources", d.reflection_sources);
    c.long_term_capacity = j.value("long_term_capacity", d.long_term_capacity);
    c.short_term_capacity = j.value("short_term_capacity", d.short_term_capacity);
    c.compression_cap = j.value("compression_cap", d.compression_cap);
}

void to_json(json& j, const MemoryStores& s) {
    j = json{{"config", s.config}, {"short_term", s.short_term}, {"long_term", s.long_term}, {"next_id", s.next_id}};
}

void from_json(const json& j, MemoryStores& s) {
    s.config = j.at("config").get<MemoryConfig>();
    s.short_term = j.at("short_term").get<std::vector<MemoryRecord>>();
    s.long_term = j.at("long_term").get<std::vector<MemoryRecord>>();
    s.next_id = j.at("next_id").get<RecordId>();
}

std::string memory_debug_dump(const MemoryStores& stores, const SimClock& now) {
    std::ostringstream out;
    for (const auto* tier : {&stores.short_term, &stores.long_term}) {
        for (const auto& r : *tier) {
            json j{{"id", r.id},
                   {"tier", to_string(r.tier)},
                   {"kind", to_string(r.kind)},
                   {"content", r.content},
                   {"importance", r.importance},
                   {"round", r.timestamp.round_index()},
                   {"enhance_count", r.enhance_count()},
                   {"enhancers", r.enhancers},
                   {"recency", recency(r, now, stores.config.recency_window)}};
            if (r.tier == MemoryTier::Long) j["forget_probability"] = forgetting_probability(r, now, stores.config);
            out << j.dump() << "\n";
        }
    }
    return out.str();
}

}  // namespace usersim
