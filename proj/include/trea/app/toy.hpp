#pragma once

#include "trea/data/dataset.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace trea::app {

struct ToyOptions {
  std::uint64_t seed = 2024;
  std::size_t attributes = 80;
  std::size_t items = 120;
  std::size_t relations = 4;
  std::size_t links_per_item = 2;
  std::size_t conversations = 60;
  std::size_t min_exchanges = 2;
  std::size_t max_exchanges = 4;
};

/// Synthetic corpus with a deterministic recommendation rule: every
/// recommender turn suggests the highest-id KG neighbour of the last entity
/// the user mentioned. Attributes take ids [0, attributes), items follow.
struct ToyCorpus {
  kg::KnowledgeGraph kg;
  kg::WordGraph words;
  std::vector<data::RawConversation> conversations;
};

ToyCorpus make_toy(const ToyOptions& options = {});

/// The rule itself.
kg::EntityId toy_rule(const kg::KnowledgeGraph& kg, kg::EntityId last_mention);

/// entities.tsv, relations.tsv, triples.tsv, words.txt, word_edges.tsv,
/// raw.jsonl and toy.conf.
void write_toy(const ToyCorpus& corpus, const std::filesystem::path& dir);

}  // namespace trea::app
