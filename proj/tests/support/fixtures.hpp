#pragma once

#include "oracles/graph_oracles.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace trea::testing {

inline kg::KnowledgeGraph make_kg(std::uint32_t n, std::uint32_t relations, const std::vector<oracle::RawTriple>& raw,
                                  const std::vector<bool>& items = {},
                                  const std::vector<std::vector<std::string>>& aliases = {}) {
  std::vector<kg::EntityRecord> ents;
  for (std::uint32_t i = 0; i < n; ++i) {
    kg::EntityRecord rec{kg::EntityId{i}, i < items.size() && items[i], {}};
    if (i < aliases.size()) rec.aliases = aliases[i];
    ents.push_back(std::move(rec));
  }
  std::vector<kg::RelationRecord> rels;
  for (std::uint32_t r = 0; r < relations; ++r) rels.push_back({kg::RelationId{r}, "r" + std::to_string(r), false});
  std::vector<kg::Triple> triples;
  for (const auto& t : raw) triples.push_back({kg::EntityId{t.head}, kg::RelationId{t.relation}, kg::EntityId{t.tail}});
  return kg::KnowledgeGraph(std::move(ents), std::move(rels), std::move(triples));
}

inline std::vector<oracle::RawTriple> random_triples(std::uint32_t n, std::uint32_t relations, std::size_t count,
                                                     std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> ent(0, n - 1), rel(0, relations - 1);
  std::vector<oracle::RawTriple> out;
  while (out.size() < count) {
    oracle::RawTriple t{ent(rng), rel(rng), ent(rng)};
    if (t.head != t.tail) out.push_back(t);
  }
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("trea_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path write(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace trea::testing
