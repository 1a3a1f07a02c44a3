#include "trea/app/toy.hpp"

#include "trea/error.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>

namespace trea::app {

namespace {

const std::array<const char*, 4> kAttributeKinds{"genre", "actor", "director", "theme"};

const std::vector<std::string> kWords{
    "like",   "love",    "enjoy",   "watch",   "movie",   "film",    "recommend", "great",  "funny",  "scary",
    "sad",    "happy",   "action",  "comedy",  "drama",   "romance", "thriller",  "family", "classic", "new",
    "old",    "good",    "bad",     "fun",     "dark",    "light",   "story",     "music",  "hero",   "villain",
    "friend", "weekend", "tonight", "similar", "another", "maybe",   "sure",      "thanks", "seen",   "heard"};

// Word pairs that share a concept, indices into kWords.
const std::vector<std::pair<int, int>> kWordEdges{
    {0, 1},   {0, 2},   {1, 2},   {3, 4},   {3, 5},   {4, 5},   {7, 21},  {8, 13},  {8, 23}, {9, 18},
    {9, 24},  {10, 14}, {10, 15}, {11, 23}, {11, 25}, {12, 18}, {12, 28}, {14, 26}, {15, 1}, {16, 33},
    {19, 20}, {22, 21}, {24, 25}, {26, 27}, {28, 29}, {30, 17}, {31, 32}, {34, 33}, {35, 36},
    {37, 7},  {38, 39}, {38, 3},  {6, 33},  {27, 13}};

const std::vector<std::string> kUserTemplates{
    "i {w} {a}",
    "i {w} something with {a}",
    "maybe a {w} movie with {a}",
    "i want to {w} {a} tonight",
};

const std::vector<std::string> kRecTemplates{
    "you should watch {i}",
    "i recommend {i} it is great",
    "how about {i}",
    "{i} is a good film",
};

std::string fill(std::string tpl, const std::string& key, const std::string& value) {
  const auto pos = tpl.find(key);
  if (pos != std::string::npos) tpl.replace(pos, key.size(), value);
  return tpl;
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace

kg::EntityId toy_rule(const kg::KnowledgeGraph& kg, kg::EntityId last_mention) {
  const auto adj = kg.adjacent(last_mention);
  if (adj.empty()) throw ContractError("toy_rule: entity " + std::to_string(last_mention.index) + " has no neighbours");
  return *std::max_element(adj.begin(), adj.end());
}

ToyCorpus make_toy(const ToyOptions& o) {
  if (o.attributes == 0 || o.items == 0 || o.relations == 0 || o.links_per_item == 0) {
    throw ConfigError("make_toy: sizes must be positive");
  }
  if (o.min_exchanges == 0 || o.max_exchanges < o.min_exchanges) throw ConfigError("make_toy: bad exchange range");
  std::mt19937_64 rng(o.seed);

  std::vector<kg::EntityRecord> entities;
  for (std::size_t a = 0; a < o.attributes; ++a) {
    const auto id = static_cast<std::uint32_t>(a);
    entities.push_back({kg::EntityId{id}, false, {std::string(kAttributeKinds[a % kAttributeKinds.size()]) + "_" + std::to_string(a)}});
  }
  for (std::size_t i = 0; i < o.items; ++i) {
    const auto id = static_cast<std::uint32_t>(o.attributes + i);
    entities.push_back({kg::EntityId{id}, true, {"movie_" + std::to_string(id)}});
  }
  std::vector<kg::RelationRecord> relations;
  for (std::size_t r = 0; r < o.relations; ++r) {
    relations.push_back({kg::RelationId{static_cast<std::uint32_t>(r)},
                         r < kAttributeKinds.size() ? std::string("has_") + kAttributeKinds[r] : "rel_" + std::to_string(r),
                         false});
  }
  // Items link to distinct attributes; the first pass guarantees every
  // attribute at least one item so the rule is defined for all of them.
  std::vector<kg::Triple> triples;
  std::vector<std::vector<std::uint32_t>> item_attrs(o.items);
  for (std::size_t a = 0; a < o.attributes; ++a) item_attrs[a % o.items].push_back(static_cast<std::uint32_t>(a));
  for (std::size_t i = 0; i < o.items; ++i) {
    auto& attrs = item_attrs[i];
    while (attrs.size() < std::min(o.links_per_item, o.attributes)) {
      const auto a = static_cast<std::uint32_t>(pick(rng, o.attributes));
      if (std::find(attrs.begin(), attrs.end(), a) == attrs.end()) attrs.push_back(a);
    }
    for (auto a : attrs) {
      const auto rel = kg::RelationId{static_cast<std::uint32_t>(a % o.relations)};
      triples.push_back({kg::EntityId{static_cast<std::uint32_t>(o.attributes + i)}, rel, kg::EntityId{a}});
    }
  }
  ToyCorpus out;
  out.kg = kg::KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));

  std::vector<std::pair<kg::WordId, kg::WordId>> edges;
  for (auto [a, b] : kWordEdges) {
    if (a != b) edges.emplace_back(kg::WordId{static_cast<std::uint32_t>(a)}, kg::WordId{static_cast<std::uint32_t>(b)});
  }
  out.words = kg::WordGraph(kWords, edges);

  for (std::size_t c = 0; c < o.conversations; ++c) {
    data::RawConversation conv;
    conv.id = "toy-" + std::to_string(c);
    const auto exchanges = o.min_exchanges + pick(rng, o.max_exchanges - o.min_exchanges + 1);
    for (std::size_t x = 0; x < exchanges; ++x) {
      const auto attr = kg::EntityId{static_cast<std::uint32_t>(pick(rng, o.attributes))};
      auto user = fill(kUserTemplates[pick(rng, kUserTemplates.size())], "{w}", kWords[pick(rng, 4)]);
      user = fill(user, "{a}", out.kg.surface(attr));
      conv.turns.push_back({generator::Role::user, user, {}});
      const auto item = toy_rule(out.kg, attr);
      const auto rec = fill(kRecTemplates[pick(rng, kRecTemplates.size())], "{i}", out.kg.surface(item));
      conv.turns.push_back({generator::Role::recommender, rec, {data::RawItem{item.index}}});
    }
    out.conversations.push_back(std::move(conv));
  }
  return out;
}

void write_toy(const ToyCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  kg::write_kg(corpus.kg, dir / "entities.tsv", dir / "triples.tsv", dir / "relations.tsv");
  kg::write_word_graph(corpus.words, dir / "words.txt", dir / "word_edges.tsv");
  data::write_raw(corpus.conversations, dir / "raw.jsonl");
  std::ofstream conf(dir / "toy.conf");
  if (!conf) throw ValidationError("cannot write " + (dir / "toy.conf").string());
  conf << "# bundled toy corpus\n"
          "kg_entities = entities.tsv\n"
          "kg_relations = relations.tsv\n"
          "kg_triples = triples.tsv\n"
          "word_vocab = words.txt\n"
          "word_edges = word_edges.tsv\n"
          "raw = raw.jsonl\n"
          "prepared = prepared.jsonl\n"
          "max_epochs = 50\n"
          "gen_max_epochs = 30\n"
          "max_response = 16\n"
          "max_context = 64\n"
          "round_edges = 2,4,6\n";
}

}  // namespace trea::app
