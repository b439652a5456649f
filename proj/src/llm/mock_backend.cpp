#include "usersim/llm/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "usersim/core/rng.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

PromptKind detect_prompt_kind(std::string_view prompt) {
    struct Entry {
        std::string_view marker;
        PromptKind kind;
    };
    static constexpr Entry kEntries[] = {
        {markers::kCompress, PromptKind::Compress},
        {markers::kInsight, PromptKind::Insight},
        {markers::kProfileSummary, PromptKind::ProfileSummary},
        {markers::kProfileComplete, PromptKind::ProfileComplete},
        {markers::kTakeAction, PromptKind::TakeAction},
        {markers::kRecommenderAction, PromptKind::RecommenderAction},
        {markers::kFeeling, PromptKind::Feeling},
        {markers::kDialogue, PromptKind::Dialogue},
        {markers::kPost, PromptKind::Post},
        {markers::kInterview, PromptKind::Interview},
        {markers::kMovieScore, PromptKind::MovieScore},
        {markers::kSatisfaction, PromptKind::Satisfaction},
        {markers::kSelection, PromptKind::Selection},
    };
    PromptKind best = PromptKind::Unknown;
    std::size_t best_pos = 0;
    bool found = false;
    for (const auto& e : kEntries) {
        auto pos = prompt.rfind(e.marker);
        if (pos == std::string_view::npos) continue;
        if (!found || pos > best_pos) {
            best = e.kind;
            best_pos = pos;
            found = true;
        }
    }
    return best;
}

const char* to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::Unknown: return "unknown";
        case PromptKind::Compress: return "compress";
        case PromptKind::Insight: return "insight";
        case PromptKind::ProfileSummary: return "profile_summary";
        case PromptKind::ProfileComplete: return "profile_complete";
        case PromptKind::TakeAction: return "take_action";
        case PromptKind::RecommenderAction: return "recommender_action";
        case PromptKind::Feeling: return "feeling";
        case PromptKind::Dialogue: return "dialogue";
        case PromptKind::Post: return "post";
        case PromptKind::Interview: return "interview";
        case PromptKind::MovieScore: return "movie_score";
        case PromptKind::Satisfaction: return "satisfaction";
        case PromptKind::Selection: return "selection";
    }
    return "unknown";
}

std::map<std::string, std::string> MockPolicyState::default_templates() {
    return {
        {"feeling_positive",
         "I really enjoyed <{item}>; it was a captivating watch that fits my taste for {interest} movies, "
         "and I'd rate it {score}/10."},
        {"feeling_negative",
         "<{item}> was not really my kind of movie and I found it rather dull; I'd rate it {score}/10."},
        {"post_watched",
         "Hey everyone! Just watched <{item}> on the recommender system{opinion}. I'm really into {interest} "
         "movies lately!"},
        {"post_heard",
         "Has anyone seen <{item}>? I keep hearing about it{opinion}. I'm really into {interest} movies lately!"},
        {"post_generic",
         "Hey everyone! I'm looking for some good {interest} movies to watch, any recommendations?"},
        {"interview_watched",
         "I would tell them that I recently watched {items} and that I'm really into {interest} movies."},
        {"interview_empty",
         "I haven't watched anything recently, but I'd tell them I'm really into {interest} movies."},
        {"insight_curious",
         "{name} is a curious and open-minded individual who actively seeks recommendations and discussions "
         "about {topic}."},
        {"insight_passionate", "{name} is a passionate movie lover who is deeply moved by {topic}."},
        {"insight_critical",
         "{name} is a discerning viewer with high standards who is hard to impress with {topic}."},
        {"insight_social", "{name} is a sociable person who follows what friends share about {topic}."},
        {"insight_default", "{name} is a person with steady and consistent tastes in {topic}."},
    };
}

namespace {

std::string fill(std::string tpl, const std::map<std::string, std::string>& vars) {
    for (const auto& [k, v] : vars) {
        const std::string key = "{" + k + "}";
        std::size_t pos = 0;
        while ((pos = tpl.find(key, pos)) != std::string::npos) {
            tpl.replace(pos, key.size(), v);
            pos += v.size();
        }
    }
    return tpl;
}

std::vector<std::string> angle_spans(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = s.find('<', pos)) != std::string_view::npos) {
        auto end = s.find('>', pos + 1);
        if (end == std::string_view::npos) break;
        auto inner = text::normalize_space(s.substr(pos + 1, end - pos - 1));
        if (!inner.empty() && inner.find('<') == std::string::npos) out.push_back(inner);
        pos = end + 1;
    }
    return out;
}

bool is_upper_word(std::string_view w) {
    return !w.empty() && std::isupper(static_cast<unsigned char>(w[0]));
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

/// Up to three capitalized words at the start of `s`.
std::string leading_name(std::string_view s) {
    std::vector<std::string> picked;
    for (const auto& w : words(s)) {
        if (picked.size() == 3 || !is_upper_word(w)) break;
        std::string clean = w;
        while (!clean.empty() && std::ispunct(static_cast<unsigned char>(clean.back()))) clean.pop_back();
        if (clean.empty()) break;
        picked.push_back(clean);
        if (clean.size() != w.size()) break;  // punctuation ends the name
    }
    return text::join(picked, " ");
}

/// Up to three capitalized words immediately before `end`.
std::string trailing_name(std::string_view s) {
    auto ws = words(s);
    std::vector<std::string> picked;
    for (auto it = ws.rbegin(); it != ws.rend() && picked.size() < 3; ++it) {
        std::string w = *it;
        if (!is_upper_word(w)) break;
        bool punct_end = !w.empty() && std::ispunct(static_cast<unsigned char>(w.back()));
        if (punct_end && !picked.empty()) break;
        while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
        if (w.empty()) break;
        picked.insert(picked.begin(), w);
        if (it + 1 != ws.rend()) {
            const auto& prev = *(it + 1);
            if (!prev.empty() && std::ispunct(static_cast<unsigned char>(prev.back()))) break;
        }
    }
    return text::join(picked, " ");
}

struct Rating {
    std::string item;
    int score;
};

/// "N/10" occurrences in a segment, each attached to the closest preceding <item>.
std::vector<Rating> ratings_in(std::string_view segment, const std::string& fallback_item) {
    std::vector<Rating> out;
    std::size_t pos = 0;
    while ((pos = segment.find("/10", pos)) != std::string_view::npos) {
        std::size_t b = pos;
        while (b > 0 && std::isdigit(static_cast<unsigned char>(segment[b - 1]))) --b;
        const bool trailing_digit =
            pos + 3 < segment.size() && std::isdigit(static_cast<unsigned char>(segment[pos + 3]));
        if (b < pos && pos - b <= 2 && !trailing_digit) {
            const int score = std::stoi(std::string(segment.substr(b, pos - b)));
            auto before = angle_spans(segment.substr(0, b));
            std::string item = before.empty() ? fallback_item : before.back();
            if (!item.empty() && score >= 1 && score <= 10) out.push_back({item, score});
        }
        pos += 3;
    }
    return out;
}

std::string between(std::string_view s, std::string_view begin, std::string_view end, bool last = true) {
    auto b = last ? s.rfind(begin) : s.find(begin);
    if (b == std::string_view::npos) return {};
    b += begin.size();
    auto e = s.find(end, b);
    if (e == std::string_view::npos) e = s.size();
    return std::string(s.substr(b, e - b));
}

std::string line_value(std::string_view block, std::string_view label) {
    for (const auto& l : text::lines(block)) {
        auto t = text::trim(l);
        if (text::istarts_with(t, label)) {
            auto v = text::trim(std::string_view(t).substr(label.size()));
            while (!v.empty() && v.back() == '.') v.pop_back();
            return v;
        }
    }
    // mock summaries put the labels mid-paragraph
    auto pos = block.find(label);
    if (pos == std::string_view::npos) return {};
    auto rest = block.substr(pos + label.size());
    auto end = rest.find_first_of(".\n");
    return text::trim(rest.substr(0, end));
}

std::vector<std::string> comma_list(std::string_view s) {
    std::vector<std::string> out;
    for (auto& part : text::split(s, ",")) {
        auto t = text::trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {"Watcher", "Explorer", "Critic", "Chatter", "Poster"};
    return names;
}

struct AgentView {
    std::string name;
    int age = 0;
    std::vector<std::string> interests;
    std::set<std::string> features;
    std::vector<std::string> heard;
    std::vector<std::string> watched;
    std::string memory;
};

struct Entry {
    std::string title;
    std::string description;
};

/// Numbered "N. <Title>||description" lines, as rendered for pages and candidate lists.
std::vector<Entry> numbered_entries(std::string_view prompt) {
    std::vector<Entry> out;
    for (const auto& l : text::lines(prompt)) {
        auto t = text::trim(l);
        std::size_t i = 0;
        while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
        if (i == 0 || i + 2 >= t.size() || t[i] != '.' || t[i + 1] != ' ' || t[i + 2] != '<') continue;
        auto close = t.find('>', i + 3);
        if (close == std::string::npos) continue;
        Entry e;
        e.title = text::normalize_space(t.substr(i + 3, close - i - 3));
        auto sep = t.find("||", close);
        if (sep == std::string::npos) sep = t.find(";;", close);
        if (sep != std::string::npos) e.description = text::trim(t.substr(sep + 2));
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<AgentView> parse_agents(std::string_view prompt) {
    std::vector<AgentView> agents;
    const auto ls = text::lines(prompt);
    for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto t = text::trim(ls[i]);
        if (!text::istarts_with(t, "Name: ")) continue;
        AgentView a;
        auto rest = t.substr(6);
        auto paren = rest.find(" (age:");
        a.name = text::trim(rest.substr(0, paren));
        if (paren != std::string::npos) {
            try {
                a.age = std::stoi(rest.substr(paren + 6));
            } catch (...) {
            }
        }
        std::string block;
        for (std::size_t j = i + 1; j < ls.size(); ++j) {
            const auto tj = text::trim(ls[j]);
            if (text::istarts_with(tj, "Name: ") || text::istarts_with(tj, "It is ")) break;
            block += ls[j] + "\n";
        }
        a.interests = comma_list(line_value(block, "Movie Interest:"));
        const auto feat = line_value(block, "Feature:");
        for (const auto& f : feature_names())
            if (feat.find(f) != std::string::npos) a.features.insert(f);
        agents.push_back(std::move(a));
    }
    for (auto& a : agents) {
        for (const auto& l : ls) {
            const auto t = text::trim(l);
            if (text::istarts_with(t, a.name + " recently heard ["))
                a.heard = angle_spans(between(t, "[", "]", false));
            if (text::istarts_with(t, a.name + " recently watched ["))
                a.watched = angle_spans(between(t, "[", "]", false));
        }
    }
    for (const auto& l : ls) {
        const auto t = text::trim(l);
        for (std::string_view label : {"Relevant long-term memories", "Most recent observations"}) {
            if (!text::istarts_with(t, label)) continue;
            auto colon = t.find(':');
            if (colon == std::string::npos) continue;
            auto head = t.substr(label.size(), colon - label.size());
            auto body = t.substr(colon + 1);
            if (text::istarts_with(text::trim(head), "of ")) {
                auto who = text::trim(text::trim(head).substr(3));
                for (auto& a : agents)
                    if (a.name == who) a.memory += body + "\n";
            } else if (!agents.empty()) {
                agents.front().memory += body + "\n";
            }
        }
    }
    return agents;
}

double unit_hash(std::uint64_t seed, std::string_view a, std::string_view b) {
    return static_cast<double>(derive_seed(seed, {hash_text(a), hash_text(b)}) >> 11) * 0x1.0p-53;
}

bool category_matches(const std::string& interest, const std::string& category) {
    const auto i = text::to_lower(interest);
    const auto c = text::to_lower(category);
    return i == c || i.find(c) != std::string::npos || c.find(i) != std::string::npos;
}

bool contains_title(const std::vector<std::string>& list, const std::string& title) {
    const auto key = text::title_key(title);
    return std::any_of(list.begin(), list.end(), [&](const auto& t) { return text::title_key(t) == key; });
}

std::string oxford_join(const std::vector<std::string>& xs) {
    if (xs.empty()) return {};
    if (xs.size() == 1) return xs[0];
    std::vector<std::string> head(xs.begin(), xs.end() - 1);
    return text::join(head, ", ") + " and " + xs.back();
}

}  // namespace

std::vector<OpinionMention> extract_opinions(std::string_view s) {
    std::vector<OpinionMention> out;
    constexpr std::string_view kKey = " rated <";
    std::size_t pos = 0;
    while ((pos = s.find(kKey, pos)) != std::string_view::npos) {
        const auto close = s.find('>', pos + kKey.size());
        if (close == std::string_view::npos) break;
        const auto title = text::normalize_space(s.substr(pos + kKey.size(), close - pos - kKey.size()));
        std::size_t d = close + 1;
        while (d < s.size() && s[d] == ' ') ++d;
        std::size_t e = d;
        while (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e]))) ++e;
        if (e > d && s.substr(e, 3) == "/10") {
            const auto line_start = s.rfind('\n', pos);
            auto lead = s.substr(line_start == std::string_view::npos ? 0 : line_start + 1,
                                 pos - (line_start == std::string_view::npos ? 0 : line_start + 1));
            OpinionMention m{trailing_name(lead), title, std::stoi(std::string(s.substr(d, e - d)))};
            if (!m.speaker.empty() && m.score >= 1 && m.score <= 10) out.push_back(std::move(m));
        }
        pos = close;
    }
    return out;
}

MockBackend::MockBackend(MockPolicyState state, std::shared_ptr<const ItemCatalog> catalog, std::size_t embed_dim)
    : state_(std::move(state)), catalog_(std::move(catalog)), embedder_(embed_dim) {}

double MockBackend::preference(const std::string& agent, const std::vector<std::string>& interests,
                               const std::string& category) const {
    if (auto it = state_.preference_weights.find(agent); it != state_.preference_weights.end()) {
        if (auto c = it->second.find(category); c != it->second.end()) return c->second;
    }
    const double jitter = unit_hash(state_.seed, agent, category);
    const bool interested =
        std::any_of(interests.begin(), interests.end(), [&](const auto& i) { return category_matches(i, category); });
    return interested ? 0.65 + 0.35 * jitter : 0.12 * jitter;
}

namespace {

class Policy {
public:
    Policy(const MockBackend& backend, const MockPolicyState& state, const ItemCatalog* catalog,
           std::string_view prompt)
        : backend_(backend), state_(state), catalog_(catalog), prompt_(prompt),
          rng_(make_rng(state.seed, {hash_text(prompt)})), agents_(parse_agents(prompt)) {}

    std::string run(PromptKind kind) {
        switch (kind) {
            case PromptKind::Compress: return compress();
            case PromptKind::Insight: return insight();
            case PromptKind::ProfileSummary: return profile_summary();
            case PromptKind::ProfileComplete: return profile_complete();
            case PromptKind::TakeAction: return take_action();
            case PromptKind::RecommenderAction: return recommender_action();
            case PromptKind::Feeling: return feeling();
            case PromptKind::Dialogue: return dialogue();
            case PromptKind::Post: return post();
            case PromptKind::Interview: return interview();
            case PromptKind::MovieScore: return movie_score();
            case PromptKind::Satisfaction: return satisfaction();
            case PromptKind::Selection: return selection();
            case PromptKind::Unknown: break;
        }
        return "I have nothing to add.";
    }

private:
    const std::string& tpl(const std::string& key) const { return state_.templates.at(key); }

    const AgentView* agent(const std::string& name) const {
        for (const auto& a : agents_)
            if (a.name == name) return &a;
        return nullptr;
    }
    const AgentView& primary() const {
        static const AgentView empty;
        return agents_.empty() ? empty : agents_.front();
    }

    std::vector<std::string> categories_of(const std::string& title, const std::string& description) const {
        if (catalog_) {
            if (const auto* item = catalog_->find_by_title(title))
                return {item->categories.begin(), item->categories.end()};
            // Unknown title: look for known category labels in the text
            std::vector<std::string> found;
            for (const auto& c : catalog_->category_universe())
                if (text::icontains(description, c) || text::icontains(title, c)) found.push_back(c);
            return found;
        }
        return {};
    }

    double affinity(const AgentView& a, const std::string& title, const std::string& description = {}) const {
        auto cats = categories_of(title, description);
        if (cats.empty()) {
            for (const auto& i : a.interests)
                if (text::icontains(description, i) || text::icontains(title, i)) return 0.65;
            return 0.05;
        }
        double best = 0;
        for (const auto& c : cats) best = std::max(best, backend_.preference(a.name, a.interests, c));
        return best;
    }

    std::string interest_phrase(const AgentView& a) const {
        if (a.interests.empty()) return "good";
        if (a.interests.size() == 1) return a.interests[0];
        return a.interests[0] + " and " + a.interests[1];
    }

    /// Moves the prior toward the mean of the k heard ratings by weight 0.5 * k / (k + 2),
    /// rounding stochastically, so agents who hear more move more often.
    std::optional<int> opinion(const AgentView& a, const std::string& title, std::optional<int> prior_override) {
        std::optional<int> own;
        double heard_sum = 0;
        int heard_n = 0;
        const auto key = text::title_key(title);
        for (const auto& m : extract_opinions(a.memory)) {
            if (text::title_key(m.title) != key) continue;
            if (m.speaker == a.name) {
                own = m.score;
            } else {
                heard_sum += m.score;
                ++heard_n;
            }
        }
        std::optional<int> prior = prior_override ? prior_override : own;
        if (!prior && heard_n == 0) return std::nullopt;
        if (!prior) prior = static_cast<int>(std::lround(3 + 5 * affinity(a, title)));
        if (heard_n == 0) return prior;
        const double w = 0.5 * heard_n / (heard_n + 2.0);
        const double mixed = *prior + w * (heard_sum / heard_n - *prior);
        return std::clamp(static_cast<int>(std::floor(mixed + uniform01(rng_))), 1, 10);
    }

    std::string compress() {
        const auto ob = between(prompt_, "The observations are as following: ", ". You should summarize the above");
        const auto ls = text::lines(ob);
        struct Turn {
            std::string speaker, text;
        };
        std::vector<Turn> turns;
        for (const auto& l : ls) {
            auto t = text::trim(l);
            if (t.size() > 3 && t[0] == '[') {
                auto close = t.find("]:");
                if (close != std::string::npos)
                    turns.push_back({t.substr(1, close - 1), text::trim(t.substr(close + 2))});
            }
        }
        std::vector<std::string> clauses;
        auto add_ratings = [&](const std::string& speaker, std::string_view segment, const std::string& fallback) {
            for (const auto& r : ratings_in(segment, fallback)) {
                auto clause = speaker + " rated <" + r.item + "> " + std::to_string(r.score) + "/10";
                clauses.erase(std::remove_if(clauses.begin(), clauses.end(),
                                             [&](const auto& c) {
                                                 return c.rfind(speaker + " rated <" + r.item + ">", 0) == 0;
                                             }),
                              clauses.end());
                clauses.push_back(std::move(clause));
            }
        };
        std::string sentence;
        if (!turns.empty()) {
            std::vector<std::string> speakers, items;
            std::string last_item;
            for (const auto& t : turns) {
                if (std::find(speakers.begin(), speakers.end(), t.speaker) == speakers.end()) speakers.push_back(t.speaker);
                add_ratings(t.speaker, t.text, last_item);
                for (const auto& s : angle_spans(t.text)) {
                    if (!contains_title(items, s)) items.push_back(s);
                    last_item = s;
                }
            }
            std::vector<std::string> wrapped;
            for (const auto& i : items) wrapped.push_back("<" + i + ">");
            sentence = oxford_join(speakers) + " had a conversation about " +
                       (wrapped.empty() ? std::string("movies") : text::join(wrapped, ", "));
        } else {
            auto flat = text::normalize_space(ob);
            std::string speaker, segment = flat;
            if (auto p = flat.find(" posted: "); p != std::string::npos) {
                speaker = trailing_name(std::string_view(flat).substr(0, p));
                segment = flat.substr(p + 9);
            } else {
                speaker = leading_name(flat);
            }
            if (!speaker.empty()) add_ratings(speaker, segment, "");
            // one sentence: internal sentence breaks become semicolons
            std::string out;
            for (std::size_t i = 0; i < flat.size(); ++i) {
                const char c = flat[i];
                if ((c == '.' || c == '!' || c == '?') && i + 1 < flat.size() && flat[i + 1] == ' ') {
                    out += ';';
                    continue;
                }
                out += c;
            }
            while (!out.empty() && (out.back() == '.' || out.back() == '!' || out.back() == '?' || out.back() == ';'))
                out.pop_back();
            sentence = out;
        }
        if (!clauses.empty()) sentence += "; " + text::join(clauses, "; ");
        return sentence + ".";
    }

    std::string insight() {
        std::string name;
        for (const auto& l : text::lines(prompt_)) {
            auto t = text::trim(l);
            if (text::istarts_with(t, "MR: ")) {
                name = leading_name(t.substr(4));
                break;
            }
            if (name.empty() && t.size() > 3 && std::isdigit(static_cast<unsigned char>(t[0])) && t[1] == '.')
                name = leading_name(text::trim(t.substr(2)));
        }
        if (name.empty()) name = "This person";
        const auto body = between(prompt_, "There are some memories", "Can you infer");
        std::vector<std::string> items;
        for (const auto& s : angle_spans(body))
            if (!contains_title(items, s) && items.size() < 2) items.push_back(s);
        std::string topic = "movies";
        if (items.size() == 1) topic = "movies like <" + items[0] + ">";
        if (items.size() == 2) topic = "movies like <" + items[0] + "> and <" + items[1] + ">";
        const auto lower = text::to_lower(body);
        auto has = [&](std::initializer_list<const char*> ws) {
            return std::any_of(ws.begin(), ws.end(), [&](const char* w) { return lower.find(w) != std::string::npos; });
        };
        std::string key = "insight_default";
        if (has({"seek", "recommend", "explor", "discuss", "curious", "search"}))
            key = "insight_curious";
        else if (has({"loved", "enjoy", "amazing", "captivating", "mind-blowing"}))
            key = "insight_passionate";
        else if (has({"dull", "boring", "dislike", "hated", "not really"}))
            key = "insight_critical";
        else if (has({"heard", "posted", "social", "conversation"}))
            key = "insight_social";
        return fill(tpl(key), {{"name", name}, {"topic", topic}});
    }

    std::string profile_summary() {
        const auto block = prompt_.substr(prompt_.rfind(markers::kProfileSummary));
        const auto name = line_value(block, "Name:");
        const auto age = line_value(block, "Age:");
        const auto gender = line_value(block, "Gender:");
        const auto traits = line_value(block, "Traits:");
        const auto status = line_value(block, "Status:");
        const auto interests = line_value(block, "Movie Interest:");
        const auto feature_line = line_value(block, "Feature:");
        const auto rel = line_value(block, "Interpersonal Relationships:");
        std::vector<std::string> feats;
        for (const auto& f : feature_names())
            if (feature_line.find(f) != std::string::npos) feats.push_back(f);
        std::ostringstream out;
        out << name << " is a " << (age.empty() ? "" : age + "-year-old ") << (gender.empty() ? "" : gender + " ")
            << (status.empty() ? "person" : status);
        if (!traits.empty()) out << " who is " << traits;
        out << ". Movie Interest: " << interests << ". Feature: " << text::join(feats, ", ") << ".";
        // {'David Smith': 'friend', ...}
        std::map<std::string, std::vector<std::string>> by_label;
        for (auto& part : text::split(rel, ",")) {
            auto kv = text::split(part, ":");
            if (kv.size() != 2) continue;
            auto strip = [](std::string s) {
                s = text::trim(s);
                s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '\'' || c == '{' || c == '}'; }),
                        s.end());
                return text::trim(s);
            };
            auto who = strip(kv[0]);
            auto label = strip(kv[1]);
            if (!who.empty()) by_label[label.empty() ? "friend" : label].push_back(who);
        }
        for (const auto& [label, who] : by_label) {
            if (label == "friend")
                out << " " << name << " has a friendship with " << oxford_join(who) << ".";
            else
                out << " " << name << " has a " << label << " relationship with " << oxford_join(who) << ".";
        }
        return out.str();
    }

    std::string profile_complete() {
        static const std::vector<std::string> kGenders = {"female", "male", "non-binary"};
        static const std::vector<std::string> kCareers = {"photographer", "writer", "engineer", "teacher",
                                                          "nurse",        "student", "designer", "chef"};
        static const std::vector<std::string> kTraits = {"compassionate", "ambitious", "optimistic", "curious",
                                                         "patient",       "creative",  "practical",  "energetic"};
        const auto table = prompt_.substr(0, prompt_.find(markers::kProfileComplete));
        auto name = line_value(table, "Name:");
        auto age = line_value(table, "Age:");
        auto gender = line_value(table, "Gender:");
        auto traits = line_value(table, "Traits:");
        auto status = line_value(table, "Status:");
        auto interests = line_value(table, "Movie Interest:");
        auto feature = line_value(table, "Feature:");
        const auto universe = comma_list(line_value(prompt_, "Available categories:"));
        auto pick = [&](const std::vector<std::string>& xs) { return xs[uniform_index(rng_, xs.size())]; };
        if (age.empty()) age = std::to_string(18 + uniform_index(rng_, 48));
        if (gender.empty()) gender = pick(kGenders);
        if (status.empty()) status = pick(kCareers);
        if (traits.empty()) {
            std::vector<std::string> pool = kTraits, chosen;
            for (int i = 0; i < 3; ++i) {
                auto k = uniform_index(rng_, pool.size());
                chosen.push_back(pool[k]);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
            }
            traits = text::join(chosen, ", ");
        }
        if (interests.empty() && !universe.empty()) {
            std::vector<std::string> pool = universe, chosen;
            const std::size_t n = std::min<std::size_t>(pool.size(), 1 + uniform_index(rng_, 2));
            for (std::size_t i = 0; i < n; ++i) {
                auto k = uniform_index(rng_, pool.size());
                chosen.push_back(pool[k]);
                pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
            }
            interests = text::join(chosen, ", ");
        }
        if (feature.empty()) feature = pick(feature_names());
        std::ostringstream out;
        out << "Name: " << name << "\nAge: " << age << "\nGender: " << gender << "\nTraits: " << traits
            << "\nStatus: " << status << "\nMovie Interest: " << interests << "\nFeature: " << feature << "\n";
        return out.str();
    }

    std::string take_action() {
        const auto& a = primary();
        int rec = 0, soc = 0;
        for (const auto& f : a.features) {
            if (f == "Watcher" || f == "Explorer" || f == "Critic") ++rec;
            if (f == "Chatter" || f == "Poster") ++soc;
        }
        if (rec + soc == 0) return "[NOTHING]:: " + a.name + " does nothing";
        const double p_rec = static_cast<double>(rec) / (rec + soc);
        if (uniform01(rng_) < p_rec) return "[RECOMMENDER]:: " + a.name + " enters the Recommender System.";
        return "[SOCIAL]:: " + a.name + " enters the Social Media.";
    }

    std::string recommender_action() {
        const auto& a = primary();
        const auto entries = numbered_entries(prompt_);
        const auto searched = text::trim(between(prompt_, "has searched for ", " in recommender system"));
        const bool critic = a.features.count("Critic") > 0;
        const bool chatter = a.features.count("Chatter") > 0;
        std::ptrdiff_t best = -1;
        double best_p = -1;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            double p = affinity(a, entries[i].title, entries[i].description);
            if (critic) p *= 0.6;
            if (contains_title(a.heard, entries[i].title)) p += chatter ? 0.5 : 0.35;
            if (!searched.empty() && text::title_key(searched) == text::title_key(entries[i].title)) p += 0.3;
            if (contains_title(a.watched, entries[i].title)) p *= 0.25;
            p = std::min(p, 0.95);
            if (p > best_p) {
                best_p = p;
                best = static_cast<std::ptrdiff_t>(i);
            }
        }
        if (best >= 0 && uniform01(rng_) < best_p) {
            const auto& e = entries[static_cast<std::size_t>(best)];
            return "[BUY]:: <" + e.title + ">||" + e.description;
        }
        // search for something heard on social media that is not on this page
        const double p_search = a.features.count("Explorer") ? 0.8 : 0.4;
        for (auto it = a.heard.rbegin(); it != a.heard.rend(); ++it) {
            const auto& h = *it;
            if (contains_title(a.watched, h)) continue;
            if (!searched.empty() && text::title_key(searched) == text::title_key(h)) continue;
            bool on_page = std::any_of(entries.begin(), entries.end(),
                                       [&](const Entry& e) { return text::title_key(e.title) == text::title_key(h); });
            if (on_page) continue;
            if (uniform01(rng_) < p_search) return "[SEARCH]:: " + h;
            break;
        }
        if (uniform01(rng_) < 0.75) return "[NEXT]:: " + a.name + " views the next page.";
        return "[LEAVE]:: " + a.name + " leaves the recommender system.";
    }

    std::string feeling() {
        const auto& a = primary();
        const auto ob = between(prompt_, "has just finished watching ", "\n");
        auto title = text::trim(ob.substr(0, ob.find(";;")));
        if (title.size() > 1 && title.front() == '<' && title.back() == '>') title = title.substr(1, title.size() - 2);
        const auto desc = ob.find(";;") == std::string::npos ? std::string() : ob.substr(ob.find(";;") + 2);
        const double aff = affinity(a, title, desc);
        const double jitter = uniform01(rng_) * 2.0 - 1.0;
        const int score = std::clamp(static_cast<int>(std::lround(2 + 7 * aff + jitter)), 1, 10);
        const auto& t = aff >= 0.5 ? tpl("feeling_positive") : tpl("feeling_negative");
        return fill(t, {{"item", title}, {"interest", interest_phrase(a)}, {"score", std::to_string(score)}});
    }

    std::string opinion_suffix(const AgentView& a, const std::string& item) {
        auto op = opinion(a, item, std::nullopt);
        return op ? ", I'd give it " + std::to_string(*op) + "/10" : std::string();
    }

    std::string dialogue() {
        const auto pair = between(prompt_, "What will be said between ", "?");
        const auto names = text::split(pair, " and ");
        if (names.size() != 2) return "[Unknown]: ...";
        const auto na = text::trim(names[0]);
        const auto nb = text::trim(names[1]);
        static const AgentView blank;
        const AgentView* pa = agent(na);
        const AgentView* pb = agent(nb);
        const AgentView& a = pa ? *pa : blank;
        const AgentView& b = pb ? *pb : blank;
        std::string item;
        if (!a.watched.empty())
            item = a.watched.back();
        else if (!a.heard.empty())
            item = a.heard.back();
        std::ostringstream out;
        const std::string first_b = text::split(nb, " ").front();
        const std::string first_a = text::split(na, " ").front();
        if (item.empty()) {
            out << "[" << na << "]: Hey " << first_b << "! Have you seen any good " << interest_phrase(a)
                << " movies lately?\n";
            out << "[" << nb << "]: Hi " << first_a << "! Not really, I've mostly been looking for "
                << interest_phrase(b) << " movies.\n";
            out << "[" << na << "]: I'm really into " << interest_phrase(a)
                << " movies lately, let me know if you find something.\n";
            out << "[" << nb << "]: Sure, let's keep each other posted!\n";
            return out.str();
        }
        const bool watched = contains_title(a.watched, item);
        out << "[" << na << "]: Hey " << first_b << "! I " << (watched ? "recently watched" : "keep hearing about")
            << " <" << item << ">" << opinion_suffix(a, item) << ". Have you seen it?\n";
        const bool b_knows = contains_title(b.watched, item) || contains_title(b.heard, item);
        if (b_knows)
            out << "[" << nb << "]: Hi " << first_a << "! Yes, I know <" << item << ">" << opinion_suffix(b, item)
                << ". I'm mostly into " << interest_phrase(b) << " movies.\n";
        else
            out << "[" << nb << "]: Hi " << first_a << "! Not yet, but I'd love to hear more about <" << item
                << ">. I'm mostly into " << interest_phrase(b) << " movies.\n";
        out << "[" << na << "]: I'm really into " << interest_phrase(a) << " movies lately, so it was right up my alley.\n";
        out << "[" << nb << "]: Sounds great, let's chat again soon!\n";
        return out.str();
    }

    std::string post() {
        const auto& a = primary();
        if (!a.watched.empty()) {
            const auto& item = a.watched.back();
            return fill(tpl("post_watched"),
                        {{"item", item}, {"opinion", opinion_suffix(a, item)}, {"interest", interest_phrase(a)}});
        }
        if (!a.heard.empty()) {
            const auto& item = a.heard.back();
            return fill(tpl("post_heard"),
                        {{"item", item}, {"opinion", opinion_suffix(a, item)}, {"interest", interest_phrase(a)}});
        }
        return fill(tpl("post_generic"), {{"interest", interest_phrase(a)}});
    }

    std::string interview() {
        const auto& a = primary();
        if (a.watched.empty()) return fill(tpl("interview_empty"), {{"interest", interest_phrase(a)}});
        std::vector<std::string> recent;
        for (auto it = a.watched.rbegin(); it != a.watched.rend() && recent.size() < 2; ++it)
            if (!contains_title(recent, "<" + *it + ">")) recent.push_back("<" + *it + ">");
        return fill(tpl("interview_watched"), {{"items", oxford_join(recent)}, {"interest", interest_phrase(a)}});
    }

    std::string movie_score() {
        const auto& a = primary();
        const auto spans = angle_spans(between(prompt_, std::string(markers::kMovieScore), "\n"));
        if (spans.empty()) return "5";
        const auto& title = spans.front();
        std::optional<int> prior;
        const auto prev = between(prompt_, "Your previous score for <" + title + "> was ", "/10");
        if (!prev.empty()) {
            try {
                prior = std::stoi(prev);
            } catch (...) {
            }
        }
        auto op = opinion(a, title, prior);
        if (!op) op = static_cast<int>(std::lround(3 + 5 * affinity(a, title)));
        return std::to_string(*op);
    }

    std::string satisfaction() {
        const auto& a = primary();
        const auto entries = numbered_entries(prompt_);
        if (entries.empty()) return "5";
        double total = 0;
        for (const auto& e : entries) total += affinity(a, e.title, e.description) >= 0.5 ? 1.0 : 0.0;
        const double frac = total / static_cast<double>(entries.size());
        return std::to_string(std::clamp(static_cast<int>(std::lround(1 + 9 * frac)), 1, 10));
    }

    std::string selection() {
        const auto& a = primary();
        const auto entries = numbered_entries(prompt_);
        int want = 1;
        const auto n = between(prompt_, std::string(markers::kSelection) + " ", " ");
        try {
            want = std::max(1, std::stoi(n));
        } catch (...) {
        }
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            double s = affinity(a, entries[i].title, entries[i].description) + 0.25 * uniform01(rng_);
            scored.emplace_back(-s, i);
        }
        std::sort(scored.begin(), scored.end());
        std::vector<std::string> picked;
        for (std::size_t k = 0; k < scored.size() && static_cast<int>(picked.size()) < want; ++k)
            picked.push_back("<" + entries[scored[k].second].title + ">");
        return "[SELECT]:: " + text::join(picked, "; ");
    }

    const MockBackend& backend_;
    const MockPolicyState& state_;
    const ItemCatalog* catalog_;
    std::string prompt_;
    Rng rng_;
    std::vector<AgentView> agents_;
};

}  // namespace

std::string MockBackend::do_complete(const CompletionRequest& request) {
    Policy policy(*this, state_, catalog_.get(), request.prompt);
    auto out = policy.run(detect_prompt_kind(request.prompt));
    if (text::trim(out).empty()) out = "I have nothing to add.";
    return out;
}

}  // namespace usersim
