#include "usersim/agent/profile.hpp"

#include <algorithm>
#include <sstream>

#include "usersim/core/error.hpp"
#include "usersim/core/text.hpp"
#include "usersim/llm/prompt_kind.hpp"

namespace usersim {

using nlohmann::json;

const char* to_string(Feature f) {
    switch (f) {
        case Feature::Watcher: return "Watcher";
        case Feature::Explorer: return "Explorer";
        case Feature::Critic: return "Critic";
        case Feature::Chatter: return "Chatter";
        case Feature::Poster: return "Poster";
    }
    return "Watcher";
}

std::optional<Feature> parse_feature(std::string_view name) {
    const auto key = text::to_lower(text::trim(name));
    for (auto f : all_features())
        if (text::to_lower(to_string(f)) == key) return f;
    return std::nullopt;
}

const char* describe(Feature f) {
    switch (f) {
        case Feature::Watcher: return "Choose movies, enjoy watching, and provide feedback and ratings to the recommendation system.";
        case Feature::Explorer: return "Search for movies heard of before and expand movie experiences.";
        case Feature::Critic: return "Demand high standards for movies and the recommendation system, and may criticize both.";
        case Feature::Chatter: return "Always engage in private conversations and trust friends' recommendations.";
        case Feature::Poster: return "Enjoy publicly posting on social media and sharing content and insights with more people.";
    }
    return "";
}

const std::vector<Feature>& all_features() {
    static const std::vector<Feature> fs = {Feature::Watcher, Feature::Explorer, Feature::Critic, Feature::Chatter,
                                            Feature::Poster};
    return fs;
}

void validate_profile(const AgentProfile& p, const ItemCatalog* catalog) {
    auto fail = [&](const std::string& msg) {
        throw SimError(ErrorCode::InvalidInput, "profile " + p.id.str() + ": " + msg);
    };
    if (text::trim(p.name).empty()) fail("name is empty");
    if (p.age <= 0) fail("age must be positive");
    if (p.features.empty()) fail("features must not be empty");
    if (p.interests.empty()) fail("interests must not be empty");
    if (!(p.activity_level > 0) || !std::isfinite(p.activity_level)) fail("activity_level must be positive");
    if (p.relationships.count(p.id)) fail("relationships must not include the agent itself");
    if (catalog) {
        for (const auto& i : p.interests)
            if (!catalog->category_universe().count(i)) fail("interest '" + i + "' is not a catalog category");
    }
}

void to_json(json& j, const AgentProfile& p) {
    std::vector<std::string> features;
    for (auto f : p.features) features.emplace_back(to_string(f));
    json rel = json::object();
    for (const auto& [id, label] : p.relationships) rel[std::to_string(id.value)] = label;
    j = json{{"id", p.id.value},       {"name", p.name},
             {"gender", p.gender},     {"age", p.age},
             {"traits", p.traits},     {"career", p.career},
             {"interests", p.interests}, {"features", features},
             {"relationships", rel},   {"activity_level", p.activity_level},
             {"version", p.version}};
}

void from_json(const json& j, AgentProfile& p) {
    p.id = AgentId{j.at("id").get<std::uint32_t>()};
    p.name = j.at("name").get<std::string>();
    p.gender = j.value("gender", std::string());
    p.age = j.at("age").get<int>();
    p.traits = j.value("traits", std::vector<std::string>{});
    p.career = j.value("career", std::string());
    p.interests = j.at("interests").get<std::vector<std::string>>();
    p.features.clear();
    for (const auto& f : j.at("features")) {
        auto parsed = parse_feature(f.get<std::string>());
        if (!parsed) throw SimError(ErrorCode::InvalidInput, "unknown feature '" + f.get<std::string>() + "'");
        p.features.insert(*parsed);
    }
    p.relationships.clear();
    if (j.contains("relationships")) {
        for (const auto& [k, v] : j.at("relationships").items())
            p.relationships[AgentId{static_cast<std::uint32_t>(std::stoul(k))}] = v.get<std::string>();
    }
    p.activity_level = j.value("activity_level", 1.0);
    p.version = j.value("version", std::uint64_t{0});
}

std::string profiles_to_jsonl(const std::vector<AgentProfile>& profiles) {
    std::string out;
    for (const auto& p : profiles) out += json(p).dump() + "\n";
    return out;
}

std::vector<AgentProfile> profiles_from_jsonl(std::string_view content) {
    std::vector<AgentProfile> out;
    std::size_t n = 0;
    for (const auto& line : text::lines(content)) {
        ++n;
        if (text::trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SimError(ErrorCode::InvalidInput, "profile line " + std::to_string(n) + " is not JSON");
        try {
            out.push_back(j.get<AgentProfile>());
        } catch (const json::exception& e) {
            throw SimError(ErrorCode::InvalidInput, "profile line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::string render_profile_table(const AgentProfile& p, const NameLookup& names) {
    std::ostringstream out;
    out << "Name: " << p.name << "\n";
    out << "Age: " << p.age << "\n";
    out << "Gender: " << p.gender << "\n";
    out << "Traits: " << text::join(p.traits, ", ") << "\n";
    out << "Status: " << p.career << "\n";
    out << "Movie Interest: " << text::join(p.interests, ", ") << "\n";
    std::vector<std::string> feats;
    for (auto f : p.features) feats.push_back(std::string(to_string(f)) + " (" + describe(f) + ")");
    out << "Feature: " << text::join(feats, "; ") << "\n";
    std::vector<std::string> rel;
    for (const auto& [id, label] : p.relationships)
        rel.push_back("'" + (names ? names(id) : id.str()) + "': '" + label + "'");
    out << "Interpersonal Relationships: {" << text::join(rel, ", ") << "}\n";
    return out.str();
}

ProfilePatch parse_profile_patch(const json& j) {
    if (!j.is_object()) throw SimError(ErrorCode::InvalidPatch, "patch must be a JSON object");
    ProfilePatch patch;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "name") patch.name = v.get<std::string>();
            else if (key == "gender") patch.gender = v.get<std::string>();
            else if (key == "age") patch.age = v.get<int>();
            else if (key == "traits") patch.traits = v.get<std::vector<std::string>>();
            else if (key == "career") patch.career = v.get<std::string>();
            else if (key == "interests") patch.interests = v.get<std::vector<std::string>>();
            else if (key == "activity_level") patch.activity_level = v.get<double>();
            else if (key == "features") {
                std::set<Feature> fs;
                for (const auto& f : v) {
                    auto parsed = parse_feature(f.get<std::string>());
                    if (!parsed) throw SimError(ErrorCode::InvalidPatch, "features: unknown '" + f.get<std::string>() + "'");
                    fs.insert(*parsed);
                }
                patch.features = fs;
            } else if (key == "relationships") {
                throw SimError(ErrorCode::InvalidPatch, "relationships: edit the social graph instead");
            } else {
                throw SimError(ErrorCode::InvalidPatch, key + ": unknown field");
            }
        }
    } catch (const json::exception& e) {
        throw SimError(ErrorCode::InvalidPatch, std::string("wrong field type: ") + e.what());
    }
    return patch;
}

AgentProfile apply_patch(const AgentProfile& p, const ProfilePatch& patch, const ItemCatalog* catalog) {
    AgentProfile out = p;
    if (patch.name) out.name = *patch.name;
    if (patch.gender) out.gender = *patch.gender;
    if (patch.age) out.age = *patch.age;
    if (patch.traits) out.traits = *patch.traits;
    if (patch.career) out.career = *patch.career;
    if (patch.interests) out.interests = *patch.interests;
    if (patch.features) out.features = *patch.features;
    if (patch.activity_level) out.activity_level = *patch.activity_level;
    try {
        validate_profile(out, catalog);
    } catch (const SimError& e) {
        throw SimError(ErrorCode::InvalidPatch, e.what());
    }
    out.version = p.version + 1;
    return out;
}

namespace {

/// Maps a free-text label onto the catalog's spelling, case-insensitively.
std::optional<std::string> canonical_category(const ItemCatalog& catalog, std::string_view label) {
    auto key = text::to_lower(text::trim(label));
    if (key.size() > 7 && key.substr(key.size() - 7) == " movies") key = key.substr(0, key.size() - 7);
    for (const auto& c : catalog.category_universe())
        if (text::to_lower(c) == key) return c;
    return std::nullopt;
}

std::map<std::string, std::string> parse_fields(std::string_view out) {
    std::map<std::string, std::string> fields;
    for (const auto& line : text::lines(out)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        fields[text::to_lower(text::trim(line.substr(0, colon)))] = text::trim(line.substr(colon + 1));
    }
    return fields;
}

std::vector<std::string> comma_list(std::string_view s) {
    std::vector<std::string> out;
    for (auto& part : text::split(s, ",")) {
        auto t = text::trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

AgentProfile complete_from_output(const PartialProfile& partial, const ItemCatalog& catalog, std::string_view out) {
    auto fields = parse_fields(out);
    auto get = [&](const char* k) -> std::string {
        auto it = fields.find(k);
        return it == fields.end() ? std::string() : it->second;
    };
    AgentProfile p;
    p.id = partial.id;
    p.name = partial.name;
    if (partial.age) {
        p.age = *partial.age;
    } else {
        try {
            p.age = std::stoi(get("age"));
        } catch (...) {
            throw SimError(ErrorCode::ProfileGenerationFailed, "age missing or not a number");
        }
    }
    p.gender = partial.gender ? *partial.gender : get("gender");
    p.traits = partial.traits ? *partial.traits : comma_list(get("traits"));
    p.career = partial.career ? *partial.career : get("status");
    if (partial.interests) {
        p.interests = *partial.interests;
    } else {
        for (const auto& i : comma_list(get("movie interest"))) {
            auto c = canonical_category(catalog, i);
            if (!c) throw SimError(ErrorCode::ProfileGenerationFailed, "interest '" + i + "' is not a catalog category");
            if (std::find(p.interests.begin(), p.interests.end(), *c) == p.interests.end()) p.interests.push_back(*c);
        }
    }
    if (partial.features) {
        p.features = *partial.features;
    } else {
        for (const auto& f : comma_list(get("feature"))) {
            auto parsed = parse_feature(f);
            if (!parsed) throw SimError(ErrorCode::ProfileGenerationFailed, "unknown feature '" + f + "'");
            p.features.insert(*parsed);
        }
    }
    try {
        validate_profile(p, &catalog);
    } catch (const SimError& e) {
        throw SimError(ErrorCode::ProfileGenerationFailed, e.what());
    }
    return p;
}

}  // namespace

std::string profile_completion_prompt(const PartialProfile& partial, const ItemCatalog& catalog) {
    std::ostringstream out;
    auto opt = [](const auto& o, auto render) { return o ? render(*o) : std::string(); };
    out << "Here is a partial user profile:\n";
    out << "Name: " << partial.name << "\n";
    out << "Age: " << opt(partial.age, [](int a) { return std::to_string(a); }) << "\n";
    out << "Gender: " << opt(partial.gender, [](const std::string& s) { return s; }) << "\n";
    out << "Traits: " << opt(partial.traits, [](const auto& v) { return text::join(v, ", "); }) << "\n";
    out << "Status: " << opt(partial.career, [](const std::string& s) { return s; }) << "\n";
    out << "Movie Interest: " << opt(partial.interests, [](const auto& v) { return text::join(v, ", "); }) << "\n";
    out << "Feature: "
        << opt(partial.features,
               [](const auto& v) {
                   std::vector<std::string> names;
                   for (auto f : v) names.emplace_back(to_string(f));
                   return text::join(names, ", ");
               })
        << "\n";
    std::vector<std::string> cats(catalog.category_universe().begin(), catalog.category_universe().end());
    out << "Available categories: " << text::join(cats, ", ") << "\n\n";
    out << "Please " << markers::kProfileComplete
        << ". Keep every given value, fill in every empty field, and answer with the same seven 'Field: value' "
           "lines. Movie Interest must list one or more available categories separated by commas. Feature must "
           "list one or more of Watcher, Explorer, Critic, Chatter, Poster separated by commas.";
    return out.str();
}

GeneratedProfile generate_profile(const ProfileStrategy& strategy, const ItemCatalog& catalog, LlmPort* port) {
    GeneratedProfile out;
    if (const auto* h = std::get_if<HandcraftedSpec>(&strategy)) {
        validate_profile(h->profile, &catalog);
        out.profile = h->profile;
        return out;
    }
    if (const auto* partial = std::get_if<PartialProfile>(&strategy)) {
        if (text::trim(partial->name).empty())
            throw SimError(ErrorCode::InvalidInput, "partial profile needs at least a name");
        if (!port) throw SimError(ErrorCode::InvalidInput, "llm profile strategy needs a port");
        auto prompt = profile_completion_prompt(*partial, catalog);
        std::string last_error;
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                out.profile = complete_from_output(*partial, catalog, port->complete(prompt));
                return out;
            } catch (const SimError& e) {
                if (e.code() != ErrorCode::ProfileGenerationFailed) throw;
                last_error = e.what();
                prompt += std::string("\n\n") + std::string(markers::kRetry) + " " + last_error;
            }
        }
        throw SimError(ErrorCode::ProfileGenerationFailed, partial->name + ": " + last_error);
    }
    const auto& hist = std::get<DatasetHistory>(strategy);
    if (hist.items.empty()) throw SimError(ErrorCode::InvalidInput, "dataset history is empty");
    std::map<std::string, int> counts;
    for (const auto& id : hist.items) {
        const auto* item = catalog.find(id);
        if (!item) throw SimError(ErrorCode::InvalidInput, "history item '" + id + "' is not in the catalog");
        for (const auto& c : item->categories) ++counts[c];
        out.watched.push_back(item->title);
    }
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& [c, n] : counts) ranked.emplace_back(-n, c);
    std::sort(ranked.begin(), ranked.end());
    AgentProfile& p = out.profile;
    p.id = hist.id;
    p.name = hist.name;
    p.age = 30;
    p.features = {Feature::Watcher};
    for (std::size_t i = 0; i < ranked.size() && i < std::max<std::size_t>(1, hist.top_interests); ++i)
        p.interests.push_back(ranked[i].second);
    const std::size_t first = hist.items.size() > hist.seed_memories ? hist.items.size() - hist.seed_memories : 0;
    for (std::size_t i = first; i < hist.items.size(); ++i)
        out.seed_observations.push_back(hist.name + " watched <" + catalog.find(hist.items[i])->title +
                                        "> on the recommender system.");
    validate_profile(p, &catalog);
    return out;
}

std::string summary_prompt(const AgentProfile& p, std::string_view observation, const NameLookup& names) {
    std::ostringstream out;
    if (text::trim(observation).empty())
        out << "Given the profile of " << p.name << ", please summarize the relevant details from their profile.";
    else
        out << "Given the following observation about " << p.name << ": '" << text::normalize_space(observation)
            << "', please summarize the relevant details from their profile.";
    out << " Their profile information is as follows:\n\n" << render_profile_table(p, names);
    out << "\nPlease avoid repeating the observation in the summary.\n\nSummary:";
    return out.str();
}

std::string summarize_profile_for(LlmPort& port, const AgentProfile& p, std::string_view observation,
                                  const NameLookup& names) {
    std::string summary;
    try {
        summary = text::trim(port.complete(summary_prompt(p, observation, names)));
    } catch (const SimError&) {
        return render_profile_table(p, names);
    }
    const auto obs = text::normalize_space(observation);
    if (!obs.empty()) {
        std::size_t pos;
        while ((pos = summary.find(obs)) != std::string::npos) summary.erase(pos, obs.size());
        summary = text::normalize_space(summary);
    }
    if (summary.empty()) return render_profile_table(p, names);
    return summary;
}

const std::string* SummaryCache::find(AgentId agent, std::uint64_t version, const std::string& kind) const {
    auto it = entries_.find({agent.value, version, kind});
    return it == entries_.end() ? nullptr : &it->second;
}

void SummaryCache::put(AgentId agent, std::uint64_t version, const std::string& kind, std::string summary) {
    entries_[{agent.value, version, kind}] = std::move(summary);
}

void SummaryCache::invalidate(AgentId agent) {
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (std::get<0>(it->first) == agent.value)
            it = entries_.erase(it);
        else
            ++it;
    }
}

json SummaryCache::to_json() const {
    json arr = json::array();
    for (const auto& [k, v] : entries_)
        arr.push_back({{"agent", std::get<0>(k)}, {"version", std::get<1>(k)}, {"kind", std::get<2>(k)}, {"summary", v}});
    return arr;
}

SummaryCache SummaryCache::from_json(const json& j) {
    SummaryCache c;
    for (const auto& e : j)
        c.entries_[{e.at("agent").get<std::uint32_t>(), e.at("version").get<std::uint64_t>(),
                    e.at("kind").get<std::string>()}] = e.at("summary").get<std::string>();
    return c;
}

}  // namespace usersim
