#include "trea/kg/linker.hpp"

#include "trea/kg/text.hpp"

#include <algorithm>

namespace trea::kg {

EntityLinker::EntityLinker(const KnowledgeGraph& kg) {
  for (const auto& [alias, entity] : kg.alias_map()) {
    auto tokens = tokenize(alias);
    if (tokens.empty()) continue;
    by_first_token_[tokens.front()].push_back({std::move(tokens), entity});
  }
}

std::vector<Mention> EntityLinker::mentions(std::span<const std::string> tokens) const {
  std::vector<Mention> found;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = by_first_token_.find(tokens[i]);
    if (it == by_first_token_.end()) continue;
    for (const auto& alias : it->second) {
      const std::size_t len = alias.tokens.size();
      if (i + len > tokens.size()) continue;
      if (std::equal(alias.tokens.begin(), alias.tokens.end(), tokens.begin() + static_cast<long>(i))) {
        found.push_back({alias.entity, i, i + len});
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const Mention& a, const Mention& b) {
    const auto la = a.end - a.begin;
    const auto lb = b.end - b.begin;
    if (la != lb) return la > lb;
    return a.begin < b.begin;
  });
  std::vector<bool> covered(tokens.size(), false);
  std::vector<Mention> kept;
  for (const auto& m : found) {
    if (std::any_of(covered.begin() + static_cast<long>(m.begin), covered.begin() + static_cast<long>(m.end),
                    [](bool c) { return c; })) {
      continue;
    }
    std::fill(covered.begin() + static_cast<long>(m.begin), covered.begin() + static_cast<long>(m.end), true);
    kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(), [](const Mention& a, const Mention& b) { return a.begin < b.begin; });
  return kept;
}

std::vector<EntityId> EntityLinker::link(std::string_view utterance) const {
  const auto tokens = tokenize(utterance);
  std::vector<EntityId> out;
  for (const auto& m : mentions(tokens)) out.push_back(m.entity);
  return out;
}

std::vector<EntityId> link_entities(std::string_view utterance, const KnowledgeGraph& kg) {
  return EntityLinker(kg).link(utterance);
}

std::vector<WordId> link_words(std::span<const std::string> tokens, const WordGraph& wg) {
  std::vector<WordId> out;
  for (const auto& t : tokens) {
    if (auto w = wg.find(t)) out.push_back(*w);
  }
  return out;
}

std::vector<WordId> link_words(std::string_view utterance, const WordGraph& wg) {
  const auto tokens = tokenize(utterance);
  return link_words(tokens, wg);
}

}  // namespace trea::kg
