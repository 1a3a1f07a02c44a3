#include "doctest.h"

#include "oracles/graph_oracles.hpp"
#include "support/fixtures.hpp"
#include "trea/error.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/linker.hpp"
#include "trea/kg/text.hpp"
#include "trea/kg/word_graph.hpp"

#include <algorithm>
#include <random>

using namespace trea;
using trea::testing::make_kg;
using trea::testing::TempDir;

namespace {

std::vector<std::uint32_t> ids(std::span<const kg::EntityId> v) {
  std::vector<std::uint32_t> out;
  for (auto e : v) out.push_back(e.index);
  return out;
}

}  // namespace

TEST_CASE("load_kg re-indexes triples in both directions") {
  TempDir dir;
  auto ents = dir.write("e.tsv", "0\t0\ta\n1\t0\tb\n2\t1\tc\n");
  auto tri = dir.write("t.tsv", "0\t0\t1\n1\t0\t2\n0\t1\t2\n");
  const auto g = kg::load_kg(ents, tri);
  CHECK(g.entity_count() == 3);
  CHECK(g.relation_count() == 2);
  CHECK(ids(g.neighbors(kg::EntityId{1}, kg::RelationId{0})) == std::vector<std::uint32_t>{2});
  CHECK(ids(g.neighbors(kg::EntityId{1}, kg::RelationId{2})) == std::vector<std::uint32_t>{0});
  CHECK(g.norm_constant(kg::EntityId{1}, kg::RelationId{0}) == 1.0);
  CHECK(g.norm_constant(kg::EntityId{2}, kg::RelationId{0}) == 0.0);
  CHECK(g.is_item(kg::EntityId{2}));
}

TEST_CASE("empty triple file with declared entities is a valid graph") {
  TempDir dir;
  auto ents = dir.write("e.tsv", "0\t0\n1\t0\n2\t0\n3\t1\n4\t1\n");
  auto tri = dir.write("t.tsv", "");
  const auto g = kg::load_kg(ents, tri);
  CHECK(g.entity_count() == 5);
  CHECK(g.triples().empty());
  CHECK_FALSE(g.is_adjacent(kg::EntityId{0}, kg::EntityId{1}));
}

TEST_CASE("duplicate triples collapse to the set-based loader's neighbor sets") {
  std::vector<oracle::RawTriple> raw{{0, 0, 1}, {0, 0, 1}, {1, 1, 2}, {2, 0, 0}, {1, 1, 2}};
  const auto g = make_kg(3, 2, raw);
  const auto expected = oracle::neighbor_set(raw, 2);
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> got;
  for (std::uint32_t e = 0; e < 3; ++e) {
    for (std::uint32_t r = 0; r < 4; ++r) {
      for (auto nb : g.neighbors(kg::EntityId{e}, kg::RelationId{r})) got.emplace(e, r, nb.index);
    }
  }
  CHECK(got == expected);
  CHECK(g.triples().size() == 3);
}

TEST_CASE("load_kg reports malformed and dangling input") {
  TempDir dir;
  auto ents = dir.write("e.tsv", "0\t0\ta\n1\t0\tb\n");
  SUBCASE("malformed line carries its line number") {
    auto tri = dir.write("t.tsv", "0\t0\t1\n# comment\n0\tx\t1\n");
    try {
      kg::load_kg(ents, tri);
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("dangling entity") {
    auto tri = dir.write("t.tsv", "0\t0\t5\n");
    CHECK_THROWS_AS(kg::load_kg(ents, tri), ValidationError);
  }
  SUBCASE("dangling relation") {
    auto rels = dir.write("r.tsv", "0\tstarring\n");
    auto tri = dir.write("t.tsv", "0\t3\t1\n");
    CHECK_THROWS_AS(kg::load_kg(ents, tri, rels), ValidationError);
  }
  SUBCASE("self-loop without permission") {
    auto tri = dir.write("t.tsv", "1\t0\t1\n");
    CHECK_THROWS_AS(kg::load_kg(ents, tri), ValidationError);
  }
  SUBCASE("self-loop with permission") {
    auto rels = dir.write("r.tsv", "0\tsame_as\t1\n");
    auto tri = dir.write("t.tsv", "1\t0\t1\n");
    CHECK(kg::load_kg(ents, tri, rels).triples().size() == 1);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(kg::load_kg(dir.path() / "nope.tsv", ents), ValidationError);
  }
}

TEST_CASE("shared alias across entities is rejected") {
  CHECK_THROWS_AS(make_kg(2, 1, {}, {}, {{"Titanic"}, {"titanic"}}), ValidationError);
}

TEST_CASE("is_adjacent matches an exhaustive triple scan and is symmetric") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto raw = testing::random_triples(10, 3, 12, rng);
    const auto g = make_kg(10, 3, raw);
    for (std::uint32_t a = 0; a < 10; ++a) {
      for (std::uint32_t b = 0; b < 10; ++b) {
        const bool got = g.is_adjacent(kg::EntityId{a}, kg::EntityId{b});
        CHECK(got == oracle::adjacent(raw, a, b));
        CHECK(got == g.is_adjacent(kg::EntityId{b}, kg::EntityId{a}));
      }
    }
  }
  const auto g = make_kg(2, 1, {{0, 0, 1}});
  CHECK(g.is_adjacent(kg::EntityId{0}, kg::EntityId{1}));
  CHECK(g.is_adjacent(kg::EntityId{1}, kg::EntityId{0}));
  CHECK_THROWS_AS(g.is_adjacent(kg::EntityId{0}, kg::EntityId{9}), ValidationError);
}

TEST_CASE("normalize lowercases and collapses separators") {
  CHECK(kg::normalize("  Hello,   WORLD!! it's_ok ") == "hello world it's_ok");
  CHECK(kg::tokenize("La-La Land") == std::vector<std::string>{"la", "la", "land"});
  CHECK(kg::tokenize("").empty());
}

TEST_CASE("entity linking") {
  std::vector<std::vector<std::string>> aliases(8);
  aliases[7] = {"Titanic"};
  aliases[3] = {"La La Land"};
  aliases[1] = {"star wars"};
  aliases[2] = {"wars"};
  const auto g = make_kg(8, 1, {}, {}, aliases);
  auto link = [&](const std::string& s) {
    std::vector<std::uint32_t> out;
    for (auto e : kg::link_entities(s, g)) out.push_back(e.index);
    return out;
  };
  CHECK(link("I love Titanic") == std::vector<std::uint32_t>{7});
  CHECK(link("La La Land and Titanic") == std::vector<std::uint32_t>{3, 7});
  CHECK(link("have you seen Star Wars?") == std::vector<std::uint32_t>{1});
  CHECK(link("titanic, titanic, wars") == std::vector<std::uint32_t>{7, 7, 2});
  CHECK(link("nothing here").empty());
  CHECK(link("I love Titanic") == link("I love Titanic"));
}

TEST_CASE("entity linking matches a substring-search oracle") {
  const std::vector<std::string> words{"a", "b", "c", "d"};
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, 3), len(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> aliases;
    std::vector<std::pair<std::string, std::uint32_t>> flat;
    std::set<std::string> used;
    for (std::uint32_t e = 0; e < 6; ++e) {
      std::string alias;
      for (int k = len(rng); k > 0; --k) alias += (alias.empty() ? "" : " ") + words[pick(rng)];
      if (!used.insert(alias).second) {
        aliases.push_back({});
        continue;
      }
      aliases.push_back({alias});
      flat.emplace_back(alias, e);
    }
    const auto g = make_kg(6, 1, {}, {}, aliases);
    std::string utt;
    for (int k = 0; k < 8; ++k) utt += (k ? " " : "") + words[pick(rng)];
    std::vector<std::uint32_t> got;
    for (auto e : kg::link_entities(utt, g)) got.push_back(e.index);
    CHECK_MESSAGE(got == oracle::link(utt, flat), utt);
  }
}

TEST_CASE("word linking and word graph validation") {
  kg::WordGraph wg({"funny", "movie", "scary"}, {{kg::WordId{0}, kg::WordId{1}}});
  auto ids = [&](const std::string& s) {
    std::vector<std::uint32_t> out;
    for (auto w : kg::link_words(s, wg)) out.push_back(w.index);
    return out;
  };
  CHECK(ids("funny movie") == std::vector<std::uint32_t>{0, 1});
  CHECK(ids("Funny MOVIE") == ids("funny movie"));
  CHECK(ids("nothing at all").empty());
  CHECK_THROWS_AS(kg::WordGraph({"a", "b"}, {{kg::WordId{0}, kg::WordId{0}}}), ValidationError);
  CHECK_THROWS_AS(kg::WordGraph({"a", "b"}, {{kg::WordId{0}, kg::WordId{5}}}), ValidationError);
  CHECK_THROWS_AS(kg::WordGraph({"a", "a"}, {}), ValidationError);
}

TEST_CASE("word graph round-trips through files") {
  TempDir dir;
  kg::WordGraph wg({"x", "y", "z"}, {{kg::WordId{2}, kg::WordId{0}}});
  kg::write_word_graph(wg, dir.path() / "v.txt", dir.path() / "e.tsv");
  const auto back = kg::load_word_graph(dir.path() / "v.txt", dir.path() / "e.tsv");
  CHECK(std::vector<std::string>(back.vocab().begin(), back.vocab().end()) ==
        std::vector<std::string>{"x", "y", "z"});
  REQUIRE(back.edges().size() == 1);
  CHECK(back.edges()[0].first.index == 0);
  CHECK(back.edges()[0].second.index == 2);
}

TEST_CASE("knowledge graph round-trips through files") {
  TempDir dir;
  const auto g = make_kg(3, 2, {{0, 0, 1}, {2, 1, 0}}, {false, true, false}, {{"a b"}, {"c"}, {}});
  kg::write_kg(g, dir.path() / "e.tsv", dir.path() / "t.tsv", dir.path() / "r.tsv");
  const auto back = kg::load_kg(dir.path() / "e.tsv", dir.path() / "t.tsv", dir.path() / "r.tsv");
  CHECK(back.entity_count() == 3);
  CHECK(back.triples().size() == 2);
  CHECK(back.is_item(kg::EntityId{1}));
  CHECK(back.find_alias("a b") == kg::EntityId{0});
  CHECK(back.surface(kg::EntityId{2}) == "entity_2");
}
