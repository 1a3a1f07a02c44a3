#pragma once

#include "trea/app/model.hpp"
#include "trea/generator/generator.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace trea::app {

struct SessionOptions {
  std::size_t top_k = 10;
  std::size_t max_len = 48;
  generator::DecodeMode mode = generator::DecodeMode::greedy();
  bool items_only = true;
  bool exclude_mentioned = false;
};

struct TurnResult {
  int round = 0;  // the user turn; the response takes round + 1
  std::vector<kg::EntityId> linked;
  std::vector<kg::EntityId> recommended;  // top-k, best first
  kg::EntityId chosen;
  std::string response;
  tree::ReasoningTree tree;  // after the chosen entity was connected
};

/// One conversation against a loaded model. Entity and word embeddings are
/// computed once and reused for every turn.
class Session {
 public:
  Session(const Model& model, const Resources& resources, SessionOptions options);

  /// Link, grow the tree, predict, connect the prediction, extract context
  /// and generate. Unlinkable turns proceed with empty current-turn sets.
  TurnResult user_turn(const std::string& text);

  const tree::ReasoningTree& tree() const { return tree_; }
  SessionOptions& options() { return options_; }

 private:
  const Model& model_;
  const Resources& resources_;
  SessionOptions options_;
  ad::Tensor entities_;
  ad::Tensor words_;
  ad::Tensor frozen_entities_;
  tree::ReasoningTree tree_;
  std::vector<generator::Utterance> history_;
  std::vector<kg::WordId> context_words_;
  int round_ = 0;
};

std::string format_turn(const TurnResult& turn, const kg::KnowledgeGraph& kg);

/// Reads one utterance per line. `:quit` stops, `:tree` prints the tree as
/// DOT, `:topk N` changes the list length. Returns the exit code.
int chat_repl(std::istream& in, std::ostream& out, Session& session, const kg::KnowledgeGraph& kg);

}  // namespace trea::app
