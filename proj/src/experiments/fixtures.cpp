#include "usersim/experiments/fixtures.hpp"

#include <algorithm>
#include <cstdio>

#include "usersim/core/error.hpp"
#include "usersim/core/rng.hpp"
#include "usersim/core/text.hpp"

namespace usersim {

namespace {

struct MovieRow {
    const char* title;
    const char* description;
};

struct GenreBlock {
    const char* genre;
    MovieRow movies[8];
};

const GenreBlock kGenres[] = {
    {"Action",
     {{"Mad Max: Fury Road", "A drifter and a rebel warrior flee a desert tyrant in a relentless chase."},
      {"Die Hard", "An off-duty cop takes on armed robbers in a Los Angeles skyscraper."},
      {"John Wick", "A retired hitman returns to the underworld to settle a personal score."},
      {"Gladiator", "A betrayed Roman general fights his way back as a gladiator."},
      {"The Dark Knight", "Batman faces the Joker as Gotham slides into chaos."},
      {"Top Gun: Maverick", "A veteran pilot trains young aviators for a near impossible mission."},
      {"Mission: Impossible - Fallout", "An agent races to recover stolen plutonium after a mission goes wrong."},
      {"Speed", "A bus is rigged to explode if it drops below fifty miles per hour."}}},
    {"Comedy",
     {{"Superbad", "Two high school friends try to make the most of one last party."},
      {"The Grand Budapest Hotel", "A concierge and his lobby boy are caught up in a stolen painting caper."},
      {"Groundhog Day", "A cynical weatherman relives the same day over and over."},
      {"Airplane!", "A former pilot must land a plane after the crew falls ill."},
      {"Some Like It Hot", "Two musicians hide from the mob by joining an all-female band."},
      {"Hot Fuzz", "A top London cop is reassigned to a suspiciously quiet village."},
      {"The Big Lebowski", "A laid-back bowler is mistaken for a millionaire with the same name."},
      {"Bridesmaids", "A maid of honor's life unravels while planning her best friend's wedding."}}},
    {"Drama",
     {{"The Shawshank Redemption", "Two imprisoned men form a lasting friendship over decades."},
      {"Forrest Gump", "A kind man from Alabama drifts through decades of American history."},
      {"Moonlight", "A young man grows up in Miami across three chapters of his life."},
      {"Whiplash", "A jazz drummer is pushed to the edge by a ruthless instructor."},
      {"The Godfather", "The aging head of a crime family hands control to his reluctant son."},
      {"12 Angry Men", "A lone juror urges eleven others to reconsider a murder verdict."},
      {"Manchester by the Sea", "A grieving handyman becomes guardian to his teenage nephew."},
      {"Parasite", "A poor family schemes its way into the household of a wealthy one."}}},
    {"Horror",
     {{"The Shining", "A writer slowly loses his mind while caretaking an isolated hotel."},
      {"Get Out", "A weekend visit to his girlfriend's family turns sinister."},
      {"Hereditary", "A grieving family uncovers a dark inheritance."},
      {"A Quiet Place", "A family survives in silence while creatures hunt by sound."},
      {"The Exorcist", "A mother seeks help when her daughter shows signs of possession."},
      {"It Follows", "A young woman is stalked by a shape-shifting presence after an encounter."},
      {"The Babadook", "A widow and her son are haunted by a figure from a storybook."},
      {"The Conjuring", "Paranormal investigators help a family terrorized in their farmhouse."}}},
    {"Romance",
     {{"Casablanca", "A nightclub owner meets his former love in wartime Morocco."},
      {"The Notebook", "An elderly man reads a love story to a woman in a nursing home."},
      {"Before Sunrise", "Two strangers spend one night walking and talking in Vienna."},
      {"Pride and Prejudice", "A spirited young woman spars with a proud gentleman."},
      {"Notting Hill", "A London bookseller falls for a famous American actress."},
      {"La La Land", "A jazz pianist and an aspiring actress fall in love in Los Angeles."},
      {"Roman Holiday", "A runaway princess spends a day in Rome with a reporter."},
      {"When Harry Met Sally", "Two friends wonder for years whether men and women can be just friends."}}},
    {"Sci-Fi",
     {{"Inception", "A thief who steals secrets through dreams is asked to plant an idea."},
      {"Interstellar", "Explorers travel through a wormhole to find humanity a new home."},
      {"Blade Runner 2049", "A replicant hunter uncovers a secret that could upend society."},
      {"The Matrix", "A hacker learns that reality is a simulation run by machines."},
      {"Arrival", "A linguist tries to communicate with visitors from space."},
      {"Ex Machina", "A programmer evaluates the consciousness of a humanoid robot."},
      {"Dune", "A noble heir is drawn into a war over a desert planet."},
      {"Gravity", "Two astronauts fight to survive after debris destroys their shuttle."}}},
    {"Animation",
     {{"Spirited Away", "A girl must work in a spirit bathhouse to free her parents."},
      {"Toy Story", "A cowboy doll feels threatened by a new space ranger toy."},
      {"Up", "An old man ties balloons to his house and flies to South America."},
      {"WALL-E", "A lonely robot cleaning an abandoned Earth falls in love."},
      {"Coco", "A boy who dreams of music journeys into the Land of the Dead."},
      {"Inside Out", "The emotions inside a young girl's mind guide her through a move."},
      {"Ratatouille", "A rat who loves cooking teams up with a kitchen worker in Paris."},
      {"My Neighbor Totoro", "Two sisters befriend forest spirits in rural Japan."}}},
    {"Documentary",
     {{"Free Solo", "A climber attempts to scale El Capitan without ropes."},
      {"March of the Penguins", "Emperor penguins make their yearly journey across Antarctica."},
      {"Jiro Dreams of Sushi", "An elderly sushi master pursues perfection in a tiny Tokyo restaurant."},
      {"Man on Wire", "A high-wire artist walks between the Twin Towers in 1974."},
      {"Won't You Be My Neighbor?", "A portrait of the children's television host Fred Rogers."},
      {"Planet Earth", "A survey of the planet's habitats and the animals that live in them."},
      {"Searching for Sugar Man", "Two fans search for a musician who vanished from the spotlight."},
      {"Bowling for Columbine", "An investigation of gun violence in the United States."}}},
    {"Thriller",
     {{"Se7en", "Two detectives hunt a killer who stages murders around the seven sins."},
      {"Gone Girl", "A husband becomes the prime suspect when his wife disappears."},
      {"Zodiac", "A cartoonist becomes obsessed with an unsolved serial killer case."},
      {"Prisoners", "A father takes matters into his own hands after his daughter goes missing."},
      {"The Silence of the Lambs", "An FBI trainee seeks help from an imprisoned cannibal."},
      {"Memento", "A man with short-term memory loss hunts his wife's killer."},
      {"Nightcrawler", "An ambitious drifter films crime scenes for local news."},
      {"Shutter Island", "A marshal investigates a disappearance at an island asylum."}}},
    {"Fantasy",
     {{"The Fellowship of the Ring", "A hobbit sets out with eight companions to destroy a dark ring."},
      {"Pan's Labyrinth", "A girl in post-war Spain escapes into a mysterious underworld."},
      {"Harry Potter and the Sorcerer's Stone", "An orphan learns he is a wizard and goes to Hogwarts."},
      {"The Princess Bride", "A farmhand turned pirate sets out to rescue his true love."},
      {"Stardust", "A young man crosses into a magical realm to retrieve a fallen star."},
      {"The Shape of Water", "A mute janitor bonds with a captive amphibian creature."},
      {"Big Fish", "A son pieces together the tall tales of his dying father."},
      {"Labyrinth", "A teenager must solve a goblin king's maze to save her brother."}}},
};

const char* kFirstNames[] = {"Sophia", "Liam",   "Olivia", "Noah",  "Emma",   "Mason", "Ava",    "Ethan",
                             "Mia",    "Lucas",  "Chloe",  "Logan", "Grace",  "Owen",  "Nora",   "Caleb",
                             "Ruby",   "Isaac",  "Hazel",  "Julian", "Ivy",   "Miles", "Stella", "Leo",
                             "Alice",  "Henry",  "Clara",  "Felix", "Maya",   "Oscar", "Lena",   "Hugo"};
const char* kLastNames[] = {"Rodriguez", "Chen",  "Patel",   "Nguyen", "Johnson", "Kim",  "Garcia",
                            "Smith",     "Brown", "Ivanova", "Okafor", "Rossi",   "Silva", "Muller"};
const char* kTraits[] = {"curious", "outgoing", "thoughtful", "adventurous", "calm",     "witty",
                         "analytical", "warm",  "ambitious",  "creative",    "reserved", "easygoing"};
const char* kCareers[] = {"teacher",  "software engineer", "nurse",      "photographer", "accountant",
                          "student",  "chef",              "journalist", "architect",    "retired librarian",
                          "designer", "sales manager"};

}  // namespace

ItemCatalog builtin_catalog() {
    std::vector<Item> items;
    const std::size_t genres = std::size(kGenres);
    for (std::size_t g = 0; g < genres; ++g) {
        for (std::size_t j = 0; j < 8; ++j) {
            char id[8];
            std::snprintf(id, sizeof id, "m%03zu", j * genres + g + 1);
            const auto& row = kGenres[g].movies[j];
            items.push_back({id, row.title, row.description, {kGenres[g].genre}});
        }
    }
    return ItemCatalog(std::move(items));
}

std::vector<AgentProfile> generate_population(std::size_t n, const ItemCatalog& catalog, std::uint64_t seed,
                                              const ActivityModel& activity, const PopulationOptions& o) {
    const std::vector<std::string> cats(catalog.category_universe().begin(), catalog.category_universe().end());
    if (cats.empty()) throw SimError(ErrorCode::InvalidInput, "catalog has no categories");
    std::vector<AgentProfile> out;
    std::vector<std::string> used_names;
    for (std::size_t i = 0; i < n; ++i) {
        const auto id = static_cast<std::uint32_t>(i + 1);
        auto rng = make_rng(seed, {hash_text("population"), id});
        AgentProfile p;
        p.id = AgentId{id};
        // unique full names
        for (int attempt = 0;; ++attempt) {
            const std::string first = kFirstNames[uniform_index(rng, std::size(kFirstNames))];
            const std::string last = kLastNames[uniform_index(rng, std::size(kLastNames))];
            auto name = first + " " + last;
            if (attempt > 50) name += " " + std::to_string(id);
            if (std::find(used_names.begin(), used_names.end(), name) == used_names.end()) {
                p.name = name;
                break;
            }
        }
        used_names.push_back(p.name);
        p.gender = uniform01(rng) < 0.5 ? "female" : "male";
        p.age = 18 + static_cast<int>(uniform_index(rng, 48));
        std::vector<std::string> traits(std::begin(kTraits), std::end(kTraits));
        for (int k = 0; k < 2; ++k) {
            const auto t = uniform_index(rng, traits.size());
            p.traits.push_back(traits[t]);
            traits.erase(traits.begin() + static_cast<std::ptrdiff_t>(t));
        }
        p.career = kCareers[uniform_index(rng, std::size(kCareers))];
        auto pool = cats;
        const std::size_t span = o.interests_max >= o.interests_min ? o.interests_max - o.interests_min + 1 : 1;
        const std::size_t k = std::min(pool.size(), o.interests_min + uniform_index(rng, span));
        for (std::size_t c = 0; c < k; ++c) {
            const auto t = uniform_index(rng, pool.size());
            p.interests.push_back(pool[t]);
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(t));
        }
        if (uniform01(rng) < o.p_watcher) p.features.insert(Feature::Watcher);
        if (uniform01(rng) < o.p_explorer) p.features.insert(Feature::Explorer);
        if (uniform01(rng) < o.p_critic) p.features.insert(Feature::Critic);
        if (uniform01(rng) < o.p_chatter) p.features.insert(Feature::Chatter);
        if (uniform01(rng) < o.p_poster) p.features.insert(Feature::Poster);
        if (p.features.empty()) p.features.insert(Feature::Watcher);
        auto arng = make_rng(seed, {hash_text("activity"), id});
        p.activity_level = sample_activity_level(activity, arng);
        out.push_back(std::move(p));
    }
    return out;
}

SocialGraph generate_graph(const std::vector<AgentProfile>& profiles, std::uint64_t seed, const GraphOptions& o) {
    SocialGraph g;
    std::vector<const AgentProfile*> sorted;
    for (const auto& p : profiles) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto* p : sorted) g.add_node(p->id);
    const std::size_t connected = sorted.size() > o.isolated ? sorted.size() - o.isolated : 0;
    auto shares = [](const AgentProfile& a, const AgentProfile& b) {
        for (const auto& i : a.interests)
            if (std::find(b.interests.begin(), b.interests.end(), i) != b.interests.end()) return true;
        return false;
    };
    for (std::size_t i = 1; i < connected; ++i) {
        auto rng = make_rng(seed, {hash_text("graph"), sorted[i]->id.value});
        const std::size_t span = o.links_max >= o.links_min ? o.links_max - o.links_min + 1 : 1;
        const std::size_t links = std::min(i, o.links_min + uniform_index(rng, span));
        for (std::size_t l = 0; l < links; ++l) {
            std::vector<double> w(i, 0.0);
            double total = 0;
            for (std::size_t j = 0; j < i; ++j) {
                if (g.has_edge(sorted[i]->id, sorted[j]->id)) continue;
                w[j] = static_cast<double>(g.degree(sorted[j]->id) + 1) *
                       (shares(*sorted[i], *sorted[j]) ? o.homophily : 1.0);
                total += w[j];
            }
            if (total <= 0) break;
            double u = uniform01(rng) * total;
            std::size_t pick = i - 1;
            for (std::size_t j = 0; j < i; ++j) {
                if (w[j] <= 0) continue;
                if (u < w[j]) {
                    pick = j;
                    break;
                }
                u -= w[j];
            }
            if (w[pick] <= 0) continue;
            g.add_edge(sorted[i]->id, sorted[pick]->id, "friend");
        }
    }
    return g;
}

std::unique_ptr<Engine> build_engine(const SimulationConfig& config, std::shared_ptr<LlmPort> port,
                                     const PopulationOptions& population, const GraphOptions& graph_options) {
    auto catalog = std::make_shared<const ItemCatalog>(config.catalog_path.empty() ? builtin_catalog()
                                                                                   : load_catalog_file(config.catalog_path));
    std::vector<AgentProfile> profiles;
    if (!config.profiles_path.empty()) {
        profiles = profiles_from_jsonl(text::read_file(config.profiles_path));
    } else {
        profiles = generate_population(config.num_agents, *catalog, config.seed, config.activity, population);
    }
    SocialGraph graph;
    if (!config.graph_path.empty())
        graph = graph_from_csv(text::read_file(config.graph_path));
    else
        graph = generate_graph(profiles, config.seed, graph_options);
    if (!port) port = make_port(config, catalog);
    return std::make_unique<Engine>(config, catalog, std::move(profiles), std::move(graph), std::move(port));
}

}  // namespace usersim
