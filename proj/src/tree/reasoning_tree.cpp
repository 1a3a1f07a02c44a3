#include "trea/tree/reasoning_tree.hpp"

#include "trea/error.hpp"


#include <algorithm>
#include <sstream>

namespace trea::tree {

ReasoningTree::ReasoningTree() : nodes_{TreeNode{}}, children_(1) {}

const TreeNode& ReasoningTree::node(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("tree node " + std::to_string(id) + " does not exist");
  return nodes_[id];
}

std::span<const NodeId> ReasoningTree::children(NodeId id) const {
  node(id);
  return children_[id];
}

NodeId ReasoningTree::attach(kg::EntityId entity, NodeId parent, int turn_index) {
  node(parent);
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(TreeNode{id, entity, parent, static_cast<long>(id) - 1, turn_index});
  children_.emplace_back();
  children_[parent].push_back(id);
  return id;
}

NodeId ReasoningTree::connect(kg::EntityId entity, const kg::KnowledgeGraph& kg, int turn_index) {
  kg.check(entity);
  for (auto id = static_cast<NodeId>(nodes_.size() - 1); id > kRoot; --id) {
    if (kg.is_adjacent(*nodes_[id].entity, entity)) return attach(entity, id, turn_index);
  }
  return attach(entity, kRoot, turn_index);
}

std::vector<ReasoningBranch> ReasoningTree::branches() const {
  std::vector<ReasoningBranch> out;
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    if (!children_[id].empty()) continue;
    ReasoningBranch b;
    for (std::optional<NodeId> cur = id; cur && *cur != kRoot; cur = nodes_[*cur].parent) {
      b.node_ids.push_back(*cur);
      b.entities.push_back(*nodes_[*cur].entity);
    }
    std::reverse(b.node_ids.begin(), b.node_ids.end());
    std::reverse(b.entities.begin(), b.entities.end());
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<ReasoningBranch> ReasoningTree::branches_containing(kg::EntityId entity) const {
  auto all = branches();
  std::erase_if(all, [&](const ReasoningBranch& b) {
    return std::find(b.entities.begin(), b.entities.end(), entity) == b.entities.end();
  });
  return all;
}

void ReasoningTree::validate() const {
  if (nodes_.empty() || nodes_[0].parent || nodes_[0].entity) throw ContractError("tree: malformed root");
  if (children_.size() != nodes_.size()) throw ContractError("tree: child index size mismatch");
  std::vector<std::size_t> expected_children(nodes_.size(), 0);
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    if (n.id != id || !n.entity || !n.parent) throw ContractError("tree: node " + std::to_string(id) + " malformed");
    // Parents precede children, which rules out cycles and disconnection.
    if (*n.parent >= id) throw ContractError("tree: node " + std::to_string(id) + " has a later parent");
    if (n.mention_index <= nodes_[id - 1].mention_index) throw ContractError("tree: mention order violated");
    const auto& siblings = children_[*n.parent];
    if (std::find(siblings.begin(), siblings.end(), id) == siblings.end()) {
      throw ContractError("tree: node " + std::to_string(id) + " missing from its parent's children");
    }
    ++expected_children[*n.parent];
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (children_[id].size() != expected_children[id]) throw ContractError("tree: stale child index");
  }
}

nlohmann::json ReasoningTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    nodes.push_back({{"id", n.id},
                     {"entity", n.entity ? nlohmann::json(n.entity->index) : nlohmann::json(nullptr)},
                     {"parent", n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr)},
                     {"mention_index", n.mention_index},
                     {"turn_index", n.turn_index}});
  }
  return {{"nodes", std::move(nodes)}};
}

ReasoningTree ReasoningTree::from_json(const nlohmann::json& doc) {
  ReasoningTree t;
  const auto& nodes = doc.at("nodes");
  if (nodes.empty() || !nodes[0].at("parent").is_null()) throw ValidationError("tree json: first node must be the root");
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.at("id").get<NodeId>() != i) throw ValidationError("tree json: node ids must be sequential");
    t.attach(kg::EntityId{n.at("entity").get<std::uint32_t>()}, n.at("parent").get<NodeId>(),
             n.at("turn_index").get<int>());
  }
  t.validate();
  return t;
}

std::string ReasoningTree::to_dot(const kg::KnowledgeGraph* kg) const {
  std::ostringstream out;
  out << "digraph reasoning_tree {\n  n0 [label=\"ROOT\", shape=box];\n";
  for (NodeId id = 1; id < nodes_.size(); ++id) {
    const auto e = *nodes_[id].entity;
    std::string label = kg && e.index < kg->entity_count() ? kg->surface(e) : "e" + std::to_string(e.index);
    std::string escaped;
    for (char c : label) {
      if (c == '"' || c == '\\') escaped.push_back('\\');
      escaped.push_back(c);
    }
    out << "  n" << id << " [label=\"" << escaped << "\"];\n";
  }
  for (NodeId id = 1; id < nodes_.size(); ++id) out << "  n" << *nodes_[id].parent << " -> n" << id << ";\n";
  out << "}\n";
  return out.str();
}

std::vector<std::optional<kg::EntityId>> truncate_pad(const ReasoningBranch& branch, std::size_t length) {
  if (length == 0) throw ContractError("truncate_pad: length must be at least 1");
  std::vector<std::optional<kg::EntityId>> out(length);
  const std::size_t n = branch.entities.size();
  const std::size_t skip = n > length ? n - length : 0;
  for (std::size_t i = skip; i < n; ++i) out[i - skip] = branch.entities[i];
  return out;
}

}  // namespace trea::tree
