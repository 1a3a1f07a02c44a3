#include "trea/kg/knowledge_graph.hpp"

#include "trea/error.hpp"
#include "trea/kg/tsv.hpp"
#include "trea/kg/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <tuple>

namespace trea::kg {

namespace {

void sort_unique(std::vector<EntityId>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<EntityRecord> entities, std::vector<RelationRecord> relations,
                               std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)) {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (entities_[i].id.index != i) {
      throw ValidationError("entity ids must be dense and ordered; slot " + std::to_string(i) +
                            " holds id " + std::to_string(entities_[i].id.index));
    }
  }
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (relations_[i].id.index != i) {
      throw ValidationError("relation ids must be dense and ordered; slot " + std::to_string(i) +
                            " holds id " + std::to_string(relations_[i].id.index));
    }
  }

  for (auto& rec : entities_) {
    std::vector<std::string> cleaned;
    for (const auto& alias : rec.aliases) {
      std::string norm = normalize(alias);
      if (norm.empty()) continue;
      auto [it, inserted] = alias_to_entity_.emplace(norm, rec.id);
      if (!inserted && it->second != rec.id) {
        throw ValidationError("alias '" + norm + "' maps to entities " + std::to_string(it->second.index) +
                              " and " + std::to_string(rec.id.index));
      }
      if (std::find(cleaned.begin(), cleaned.end(), norm) == cleaned.end()) cleaned.push_back(norm);
    }
    rec.aliases = std::move(cleaned);
  }

  const std::size_t n = entities_.size();
  const std::size_t r2 = directed_relation_count();
  neighbor_index_.assign(n * r2, {});
  adjacency_.assign(n, {});

  std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> seen;
  for (const auto& t : triples) {
    if (t.head.index >= n || t.tail.index >= n) {
      throw ValidationError("triple (" + std::to_string(t.head.index) + "," + std::to_string(t.relation.index) +
                            "," + std::to_string(t.tail.index) + ") references an undeclared entity");
    }
    if (t.relation.index >= relations_.size()) {
      throw ValidationError("triple (" + std::to_string(t.head.index) + "," + std::to_string(t.relation.index) +
                            "," + std::to_string(t.tail.index) + ") references an undeclared relation");
    }
    if (t.head == t.tail && !relations_[t.relation.index].allows_self_loop) {
      throw ValidationError("self-loop on entity " + std::to_string(t.head.index) + " under relation " +
                            std::to_string(t.relation.index) + " which does not permit self-loops");
    }
    if (!seen.emplace(t.head.index, t.relation.index, t.tail.index).second) continue;
    triples_.push_back(t);
    const RelationId reverse{static_cast<std::uint32_t>(t.relation.index + relations_.size())};
    neighbor_index_[slot(t.head, t.relation)].push_back(t.tail);
    neighbor_index_[slot(t.tail, reverse)].push_back(t.head);
    adjacency_[t.head.index].push_back(t.tail);
    adjacency_[t.tail.index].push_back(t.head);
  }
  norm_constant_.assign(neighbor_index_.size(), 0.0);
  for (std::size_t i = 0; i < neighbor_index_.size(); ++i) {
    sort_unique(neighbor_index_[i]);
    if (!neighbor_index_[i].empty()) norm_constant_[i] = 1.0;
  }
  for (auto& adj : adjacency_) sort_unique(adj);
}

std::size_t KnowledgeGraph::slot(EntityId e, RelationId r) const {
  return static_cast<std::size_t>(e.index) * directed_relation_count() + r.index;
}

void KnowledgeGraph::check(EntityId e) const {
  if (e.index >= entities_.size()) {
    throw ValidationError("entity id " + std::to_string(e.index) + " out of range (" +
                          std::to_string(entities_.size()) + " entities)");
  }
}

void KnowledgeGraph::check(RelationId r) const {
  if (r.index >= directed_relation_count()) {
    throw ValidationError("relation id " + std::to_string(r.index) + " out of range");
  }
}

bool KnowledgeGraph::is_item(EntityId e) const {
  check(e);
  return entities_[e.index].is_item;
}

std::vector<EntityId> KnowledgeGraph::items() const {
  std::vector<EntityId> out;
  for (const auto& rec : entities_) {
    if (rec.is_item) out.push_back(rec.id);
  }
  return out;
}

const std::vector<std::string>& KnowledgeGraph::aliases(EntityId e) const {
  check(e);
  return entities_[e.index].aliases;
}

std::string KnowledgeGraph::surface(EntityId e) const {
  const auto& a = aliases(e);
  return a.empty() ? "entity_" + std::to_string(e.index) : a.front();
}

const RelationRecord& KnowledgeGraph::relation(RelationId r) const {
  check(r);
  return relations_[r.index % relations_.size()];
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId e, RelationId r) const {
  check(e);
  check(r);
  return neighbor_index_[slot(e, r)];
}

double KnowledgeGraph::norm_constant(EntityId e, RelationId r) const {
  check(e);
  check(r);
  return norm_constant_[slot(e, r)];
}

bool KnowledgeGraph::is_adjacent(EntityId a, EntityId b) const {
  check(a);
  check(b);
  const auto& adj = adjacency_[a.index];
  return std::binary_search(adj.begin(), adj.end(), b);
}

std::span<const EntityId> KnowledgeGraph::adjacent(EntityId e) const {
  check(e);
  return adjacency_[e.index];
}

std::optional<EntityId> KnowledgeGraph::find_alias(std::string_view normalized_alias) const {
  auto it = alias_to_entity_.find(std::string(normalized_alias));
  if (it == alias_to_entity_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph load_kg(const std::filesystem::path& entities_path, const std::filesystem::path& triples_path,
                       const std::optional<std::filesystem::path>& relations_path) {
  std::vector<EntityRecord> entities;
  {
    std::vector<std::optional<EntityRecord>> slots;
    for_each_tsv_row(entities_path, [&](const TsvRow& row) {
      if (row.fields.size() < 2 || row.fields.size() > 3) {
        throw ParseError(entities_path.string(), row.line, "expected id<TAB>is_item<TAB>aliases");
      }
      const auto id = parse_index(row.fields[0], entities_path, row.line);
      const auto flag = parse_index(row.fields[1], entities_path, row.line);
      if (flag > 1) throw ParseError(entities_path.string(), row.line, "is_item must be 0 or 1");
      EntityRecord rec{EntityId{id}, flag == 1, {}};
      if (row.fields.size() == 3) rec.aliases = split(row.fields[2], '|');
      if (slots.size() <= id) slots.resize(id + 1);
      if (slots[id]) throw ValidationError("entity id " + std::to_string(id) + " declared twice");
      slots[id] = std::move(rec);
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i]) throw ValidationError("entity id " + std::to_string(i) + " missing from entity table");
      entities.push_back(std::move(*slots[i]));
    }
  }

  std::vector<Triple> triples;
  std::uint32_t max_relation = 0;
  bool any_triple = false;
  for_each_tsv_row(triples_path, [&](const TsvRow& row) {
    if (row.fields.size() != 3) throw ParseError(triples_path.string(), row.line, "expected head<TAB>relation<TAB>tail");
    Triple t{EntityId{parse_index(row.fields[0], triples_path, row.line)},
             RelationId{parse_index(row.fields[1], triples_path, row.line)},
             EntityId{parse_index(row.fields[2], triples_path, row.line)}};
    max_relation = std::max(max_relation, t.relation.index);
    any_triple = true;
    triples.push_back(t);
  });

  std::vector<RelationRecord> relations;
  if (relations_path) {
    std::vector<std::optional<RelationRecord>> slots;
    for_each_tsv_row(*relations_path, [&](const TsvRow& row) {
      if (row.fields.size() < 2 || row.fields.size() > 3) {
        throw ParseError(relations_path->string(), row.line, "expected id<TAB>name[<TAB>self_loop]");
      }
      const auto id = parse_index(row.fields[0], *relations_path, row.line);
      RelationRecord rec{RelationId{id}, row.fields[1], false};
      if (row.fields.size() == 3) {
        const auto flag = parse_index(row.fields[2], *relations_path, row.line);
        if (flag > 1) throw ParseError(relations_path->string(), row.line, "self_loop must be 0 or 1");
        rec.allows_self_loop = flag == 1;
      }
      if (slots.size() <= id) slots.resize(id + 1);
      if (slots[id]) throw ValidationError("relation id " + std::to_string(id) + " declared twice");
      slots[id] = std::move(rec);
    });
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i]) throw ValidationError("relation id " + std::to_string(i) + " missing from relation table");
      relations.push_back(std::move(*slots[i]));
    }
  } else if (any_triple) {
    for (std::uint32_t r = 0; r <= max_relation; ++r) {
      relations.push_back({RelationId{r}, "r" + std::to_string(r), false});
    }
  }
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

void write_kg(const KnowledgeGraph& kg, const std::filesystem::path& entities_path,
              const std::filesystem::path& triples_path, const std::filesystem::path& relations_path) {
  std::ofstream ent(entities_path, std::ios::binary);
  for (const auto& rec : kg.entities()) {
    ent << rec.id.index << '\t' << (rec.is_item ? 1 : 0) << '\t';
    for (std::size_t i = 0; i < rec.aliases.size(); ++i) ent << (i ? "|" : "") << rec.aliases[i];
    ent << '\n';
  }
  std::ofstream tri(triples_path, std::ios::binary);
  for (const auto& t : kg.triples()) tri << t.head.index << '\t' << t.relation.index << '\t' << t.tail.index << '\n';
  std::ofstream rel(relations_path, std::ios::binary);
  for (const auto& r : kg.relations()) rel << r.id.index << '\t' << r.name << '\t' << (r.allows_self_loop ? 1 : 0) << '\n';
  if (!ent || !tri || !rel) throw ValidationError("failed to write knowledge graph files");
}

}  // namespace trea::kg
