#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trea::kg {

struct EntityId {
  std::uint32_t index = 0;
  friend auto operator<=>(const EntityId&, const EntityId&) = default;
};

struct RelationId {
  std::uint32_t index = 0;
  friend auto operator<=>(const RelationId&, const RelationId&) = default;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct EntityRecord {
  EntityId id;
  bool is_item = false;
  std::vector<std::string> aliases;
};

struct RelationRecord {
  RelationId id;
  std::string name;
  bool allows_self_loop = false;
};

/// Typed entity graph. Each declared relation r also gets a reverse
/// relation r + relation_count() so message passing can run both ways;
/// neighbors(e, r) lists the entities whose messages reach e under r.
/// Immutable after construction.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  KnowledgeGraph(std::vector<EntityRecord> entities, std::vector<RelationRecord> relations,
                 std::vector<Triple> triples);

  std::size_t entity_count() const { return entities_.size(); }
  /// Declared (forward) relations.
  std::size_t relation_count() const { return relations_.size(); }
  /// Forward plus reverse relations.
  std::size_t directed_relation_count() const { return 2 * relations_.size(); }

  bool is_item(EntityId e) const;
  std::vector<EntityId> items() const;
  const std::vector<std::string>& aliases(EntityId e) const;
  /// First alias, or "entity_<id>" when the entity has none.
  std::string surface(EntityId e) const;
  const RelationRecord& relation(RelationId r) const;
  std::span<const EntityRecord> entities() const { return entities_; }
  std::span<const RelationRecord> relations() const { return relations_; }
  /// Deduplicated triples in first-seen order.
  std::span<const Triple> triples() const { return triples_; }

  /// r ranges over [0, directed_relation_count()).
  std::span<const EntityId> neighbors(EntityId e, RelationId r) const;
  /// Z_{e,r}; 1 for every populated pair, 0 for an empty neighbor set.
  double norm_constant(EntityId e, RelationId r) const;

  /// Undirected: true iff some triple joins a and b in either direction.
  bool is_adjacent(EntityId a, EntityId b) const;
  std::span<const EntityId> adjacent(EntityId e) const;

  std::optional<EntityId> find_alias(std::string_view normalized_alias) const;
  const std::unordered_map<std::string, EntityId>& alias_map() const { return alias_to_entity_; }

  void check(EntityId e) const;
  void check(RelationId r) const;

 private:
  std::size_t slot(EntityId e, RelationId r) const;

  std::vector<EntityRecord> entities_;
  std::vector<RelationRecord> relations_;
  std::vector<Triple> triples_;
  std::vector<std::vector<EntityId>> neighbor_index_;
  std::vector<double> norm_constant_;
  std::vector<std::vector<EntityId>> adjacency_;
  std::unordered_map<std::string, EntityId> alias_to_entity_;
};

/// Reads the entity table (`id<TAB>is_item<TAB>alias|alias`), the triple
/// list (`head<TAB>relation<TAB>tail`) and, optionally, a relation table
/// (`id<TAB>name[<TAB>self_loop]`). Without a relation table the relation
/// count is inferred from the largest id and self-loops are rejected.
KnowledgeGraph load_kg(const std::filesystem::path& entities_path,
                       const std::filesystem::path& triples_path,
                       const std::optional<std::filesystem::path>& relations_path = std::nullopt);

void write_kg(const KnowledgeGraph& kg, const std::filesystem::path& entities_path,
              const std::filesystem::path& triples_path,
              const std::filesystem::path& relations_path);

}  // namespace trea::kg

template <>
struct std::hash<trea::kg::EntityId> {
  std::size_t operator()(const trea::kg::EntityId& e) const noexcept { return e.index; }
};
