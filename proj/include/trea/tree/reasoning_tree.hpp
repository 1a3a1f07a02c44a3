#pragma once

#include "trea/kg/knowledge_graph.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trea::tree {

using NodeId = std::uint32_t;
inline constexpr NodeId kRoot = 0;

struct TreeNode {
  NodeId id = kRoot;
  std::optional<kg::EntityId> entity;  // empty only for the root
  std::optional<NodeId> parent;        // empty only for the root
  long mention_index = -1;             // -1 for the root
  int turn_index = -1;
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Root-to-leaf path, root excluded.
struct ReasoningBranch {
  std::vector<kg::EntityId> entities;
  std::vector<NodeId> node_ids;
  friend bool operator==(const ReasoningBranch&, const ReasoningBranch&) = default;
};

/// Rooted, append-only tree of entity mentions. Node ids follow mention
/// order; every mention event gets its own node.
class ReasoningTree {
 public:
  ReasoningTree();

  /// Attaches `entity` under the most recently mentioned node whose entity
  /// is KG-adjacent to it, or under the root when none is.
  NodeId connect(kg::EntityId entity, const kg::KnowledgeGraph& kg, int turn_index = 0);
  /// Appends a node under an explicit parent (replay of a stored tree).
  NodeId attach(kg::EntityId entity, NodeId parent, int turn_index = 0);

  std::span<const TreeNode> nodes() const { return nodes_; }
  const TreeNode& node(NodeId id) const;
  std::span<const NodeId> children(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t mention_count() const { return nodes_.size() - 1; }
  bool empty() const { return nodes_.size() == 1; }

  /// One branch per leaf, ordered by leaf node id.
  std::vector<ReasoningBranch> branches() const;
  std::vector<ReasoningBranch> branches_containing(kg::EntityId entity) const;

  /// Throws ContractError if the structure is not a single rooted tree with
  /// consistent child lists and increasing mention indices.
  void validate() const;

  nlohmann::json to_json() const;
  static ReasoningTree from_json(const nlohmann::json& doc);
  /// Graphviz rendering; entity labels come from `kg` when given.
  std::string to_dot(const kg::KnowledgeGraph* kg = nullptr) const;

  friend bool operator==(const ReasoningTree& a, const ReasoningTree& b) { return a.nodes_ == b.nodes_; }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
};

/// Fixed-length view of a branch: keeps the `length` entities nearest the
/// leaf, right-padding shorter branches with nullopt.
std::vector<std::optional<kg::EntityId>> truncate_pad(const ReasoningBranch& branch, std::size_t length);

}  // namespace trea::tree
