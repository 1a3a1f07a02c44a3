#include "doctest.h"

#include "oracles/tree_oracle.hpp"
#include "support/fixtures.hpp"
#include "trea/error.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include <algorithm>
#include <random>
#include <set>

using namespace trea;
using testing::make_kg;

namespace {

kg::EntityId E(std::uint32_t i) { return kg::EntityId{i}; }

std::vector<std::vector<std::uint32_t>> entity_lists(const std::vector<tree::ReasoningBranch>& branches) {
  std::vector<std::vector<std::uint32_t>> out;
  for (const auto& b : branches) {
    std::vector<std::uint32_t> ids;
    for (auto e : b.entities) ids.push_back(e.index);
    out.push_back(ids);
  }
  return out;
}

// Random tree of `size` mention nodes built with explicit parents.
tree::ReasoningTree random_tree(std::size_t size, std::uint32_t entities, std::mt19937_64& rng) {
  tree::ReasoningTree t;
  std::uniform_int_distribution<std::uint32_t> ent(0, entities - 1);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<tree::NodeId> parent(0, static_cast<tree::NodeId>(t.size() - 1));
    t.attach(E(ent(rng)), parent(rng));
  }
  return t;
}

}  // namespace

TEST_CASE("a fresh tree holds only the root") {
  tree::ReasoningTree t;
  CHECK(t.size() == 1);
  CHECK(t.empty());
  CHECK(t.branches().empty());
  const auto g = make_kg(3, 1, {});
  t.connect(E(1), g);
  CHECK(entity_lists(t.branches()) == std::vector<std::vector<std::uint32_t>>{{1}});
  CHECK(t.node(1).parent == tree::kRoot);
}

TEST_CASE("connect attaches under the most recent adjacent mention") {
  // root -> e1 -> e2; KG edges e1-e3, e2-e3, e1-e2.
  const auto g = make_kg(4, 1, {{1, 0, 2}, {1, 0, 3}, {3, 0, 2}});
  tree::ReasoningTree t;
  t.connect(E(1), g);
  t.connect(E(2), g);
  const auto n3 = t.connect(E(3), g);
  CHECK(t.node(2).parent == 1u);
  CHECK(t.node(n3).parent == 2u);
}

TEST_CASE("connect falls back to the root and never rewires old edges") {
  const auto g = make_kg(4, 1, {{0, 0, 1}});
  tree::ReasoningTree t;
  t.connect(E(0), g);
  t.connect(E(1), g);
  const auto before = std::vector<tree::TreeNode>(t.nodes().begin(), t.nodes().end());
  const auto n = t.connect(E(3), g);
  CHECK(t.node(n).parent == tree::kRoot);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(t.nodes()[i] == before[i]);
  CHECK_THROWS_AS(t.connect(E(9), g), ValidationError);
}

TEST_CASE("connect matches a literal transcription of the strategy") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const auto raw = testing::random_triples(8, 2, 8, rng);
    const auto g = make_kg(8, 2, raw);
    tree::ReasoningTree t;
    oracle::LiteralTree lit;
    std::uniform_int_distribution<std::uint32_t> ent(0, 7);
    for (int k = 0; k < 20; ++k) {
      const auto e = ent(rng);
      t.connect(E(e), g, k);
      lit.connect(e, raw);
    }
    REQUIRE(t.size() == lit.parent.size());
    for (std::size_t i = 1; i < t.size(); ++i) {
      const auto& node = t.nodes()[i];
      CHECK(static_cast<long>(*node.parent) == lit.parent[i]);
      CHECK(node.entity->index == lit.entity[i]);
    }
    t.validate();
    CHECK(t.mention_count() == 20);
  }
}

TEST_CASE("branches enumerate root-to-leaf paths by leaf id") {
  tree::ReasoningTree chain;
  chain.attach(E(0), tree::kRoot);
  chain.attach(E(1), 1);
  CHECK(entity_lists(chain.branches()) == std::vector<std::vector<std::uint32_t>>{{0, 1}});

  // root -> a(1), root -> b(2), a -> c(3)
  tree::ReasoningTree t;
  t.attach(E(10), tree::kRoot);
  t.attach(E(11), tree::kRoot);
  t.attach(E(12), 1);
  CHECK(entity_lists(t.branches()) == std::vector<std::vector<std::uint32_t>>{{11}, {10, 12}});
}

TEST_CASE("branch count equals leaf count and branches cover every node") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_tree(30, 10, rng);
    std::size_t leaves = 0;
    for (const auto& n : t.nodes()) leaves += (n.id != tree::kRoot && t.children(n.id).empty());
    const auto branches = t.branches();
    CHECK(branches.size() == leaves);
    std::set<tree::NodeId> covered;
    for (const auto& b : branches) {
      REQUIRE_FALSE(b.node_ids.empty());
      CHECK(t.node(b.node_ids.front()).parent == tree::kRoot);
      for (std::size_t i = 1; i < b.node_ids.size(); ++i) CHECK(t.node(b.node_ids[i]).parent == b.node_ids[i - 1]);
      covered.insert(b.node_ids.begin(), b.node_ids.end());
    }
    CHECK(covered.size() == t.size() - 1);
  }
}

TEST_CASE("branches_containing is the membership filter of branches") {
  tree::ReasoningTree t;
  t.attach(E(1), tree::kRoot);
  t.attach(E(2), 1);
  t.attach(E(3), 1);
  CHECK(t.branches_containing(E(7)).empty());
  CHECK(t.branches_containing(E(1)).size() == 2);

  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const auto rt = random_tree(15, 6, rng);
    for (std::uint32_t e = 0; e < 6; ++e) {
      std::vector<tree::ReasoningBranch> want;
      for (const auto& b : rt.branches()) {
        if (std::find(b.entities.begin(), b.entities.end(), E(e)) != b.entities.end()) want.push_back(b);
      }
      CHECK(rt.branches_containing(E(e)) == want);
    }
  }
}

TEST_CASE("truncate_pad keeps the leaf side and always returns l_r slots") {
  tree::ReasoningBranch b{{E(1)}, {1}};
  auto out = tree::truncate_pad(b, 3);
  CHECK(out == std::vector<std::optional<kg::EntityId>>{E(1), std::nullopt, std::nullopt});
  tree::ReasoningBranch long_b{{E(1), E(2), E(3), E(4)}, {1, 2, 3, 4}};
  CHECK(tree::truncate_pad(long_b, 3) == std::vector<std::optional<kg::EntityId>>{E(2), E(3), E(4)});
  for (std::size_t lr = 1; lr <= 5; ++lr) {
    for (std::size_t len = 1; len <= 2 * lr; ++len) {
      tree::ReasoningBranch br;
      for (std::uint32_t i = 0; i < len; ++i) {
        br.entities.push_back(E(i));
        br.node_ids.push_back(i + 1);
      }
      const auto slots = tree::truncate_pad(br, lr);
      CHECK(slots.size() == lr);
      CHECK(slots.front().has_value());
      const auto kept = std::min(len, lr);
      CHECK(*slots[kept - 1] == br.entities.back());
    }
  }
  CHECK_THROWS(tree::truncate_pad(b, 0));
}

TEST_CASE("tree JSON round-trips and DOT names the root") {
  std::mt19937_64 rng(34);
  const auto t = random_tree(12, 5, rng);
  const auto back = tree::ReasoningTree::from_json(t.to_json());
  CHECK(back == t);
  tree::ReasoningTree root_only;
  const auto dot = root_only.to_dot();
  CHECK(dot.find("ROOT") != std::string::npos);
  CHECK(dot.find("->") == std::string::npos);
  CHECK(t.to_dot().find("->") != std::string::npos);
}

TEST_CASE("from_json rejects inconsistent documents") {
  auto doc = nlohmann::json::parse(R"({"nodes":[{"id":0,"entity":null,"parent":null,"mention_index":-1,"turn_index":-1},
                                                {"id":1,"entity":3,"parent":5,"mention_index":0,"turn_index":0}]})");
  CHECK_THROWS_AS(tree::ReasoningTree::from_json(doc), ContractError);
}
