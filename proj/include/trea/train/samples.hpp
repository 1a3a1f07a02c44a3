#pragma once

#include "trea/data/dataset.hpp"
#include "trea/generator/generator.hpp"
#include "trea/reasoner/reasoner.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include <span>
#include <string>
#include <vector>

namespace trea::train {

/// One recommender turn with a target, seen from just before it.
struct RecSample {
  std::string conversation_id;
  std::size_t turn = 0;  // index of the recommender turn
  int round = 0;
  tree::ReasoningTree tree;               // mentions of every earlier turn
  std::vector<kg::WordId> context_words;  // words of every earlier turn
  std::vector<kg::EntityId> turn_entities;  // the immediately preceding user turn
  std::vector<kg::WordId> turn_words;
  kg::EntityId target;

  reasoner::ReasoningInput input() const { return {&tree, context_words, turn_entities, turn_words}; }
};

std::vector<RecSample> rec_samples(const data::Conversation& c);
std::vector<RecSample> rec_samples(std::span<const data::Conversation* const> conversations);

/// Prior turns as generator utterances (raw tokens).
std::vector<generator::Utterance> history(const data::Conversation& c, std::size_t turns,
                                          const generator::Vocabulary& vocab);

struct GenSample {
  std::string conversation_id;
  std::size_t turn = 0;
  int round = 0;
  generator::ContextSelection selection;
  kg::EntityId slot;
  std::vector<generator::TokenId> response;  // masked
  std::vector<std::string> reference;        // masked tokens
};

/// Teacher-forced: the context is extracted from the tree extended with
/// the ground-truth target.
std::vector<GenSample> gen_samples(std::span<const data::Conversation* const> conversations,
                                   const kg::KnowledgeGraph& kg, const generator::Vocabulary& vocab,
                                   std::size_t max_context);

/// Every user utterance plus the raw and masked form of every recommender
/// utterance.
std::vector<std::vector<std::string>> vocabulary_corpus(std::span<const data::Conversation* const> conversations);

std::vector<bool> candidate_mask(const kg::KnowledgeGraph& kg, bool items_only);

}  // namespace trea::train
