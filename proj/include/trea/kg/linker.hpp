#pragma once

#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace trea::kg {

/// An alias occurrence covering tokens [begin, end).
struct Mention {
  EntityId entity;
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const Mention&, const Mention&) = default;
};

/// Exact alias matcher over normalised tokens. Among overlapping alias
/// occurrences the longer one wins (earlier start breaks ties); results are
/// reported left to right and repeated mentions are kept.
class EntityLinker {
 public:
  explicit EntityLinker(const KnowledgeGraph& kg);

  std::vector<Mention> mentions(std::span<const std::string> tokens) const;
  std::vector<EntityId> link(std::string_view utterance) const;

 private:
  struct Alias {
    std::vector<std::string> tokens;
    EntityId entity;
  };
  std::unordered_map<std::string, std::vector<Alias>> by_first_token_;
};

std::vector<EntityId> link_entities(std::string_view utterance, const KnowledgeGraph& kg);

/// Whole-token vocabulary matches in surface order.
std::vector<WordId> link_words(std::string_view utterance, const WordGraph& wg);
std::vector<WordId> link_words(std::span<const std::string> tokens, const WordGraph& wg);

}  // namespace trea::kg
