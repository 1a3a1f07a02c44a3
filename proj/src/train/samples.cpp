#include "trea/train/samples.hpp"

namespace trea::train {

std::vector<RecSample> rec_samples(const data::Conversation& c) {
  std::vector<RecSample> out;
  tree::ReasoningTree tree;
  std::vector<kg::WordId> words;
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const auto& t = c.turns[i];
    if (t.role == generator::Role::recommender && t.target) {
      RecSample s;
      s.conversation_id = c.id;
      s.turn = i;
      s.round = t.round;
      s.tree = tree;
      s.context_words = words;
      if (i > 0 && c.turns[i - 1].role == generator::Role::user) {
        s.turn_entities = c.turns[i - 1].entities;
        s.turn_words = c.turns[i - 1].words;
      }
      s.target = *t.target;
      out.push_back(std::move(s));
    }
    for (const auto& [e, parent] : t.nodes) tree.attach(e, parent, t.round);
    words.insert(words.end(), t.words.begin(), t.words.end());
  }
  return out;
}

std::vector<RecSample> rec_samples(std::span<const data::Conversation* const> conversations) {
  std::vector<RecSample> out;
  for (const auto* c : conversations) {
    auto part = rec_samples(*c);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<generator::Utterance> history(const data::Conversation& c, std::size_t turns,
                                          const generator::Vocabulary& vocab) {
  std::vector<generator::Utterance> out;
  for (std::size_t i = 0; i < std::min(turns, c.turns.size()); ++i) {
    const auto& t = c.turns[i];
    out.push_back({t.role, vocab.encode(t.tokens), t.entities});
  }
  return out;
}

std::vector<GenSample> gen_samples(std::span<const data::Conversation* const> conversations,
                                   const kg::KnowledgeGraph& kg, const generator::Vocabulary& vocab,
                                   std::size_t max_context) {
  std::vector<GenSample> out;
  for (const auto* c : conversations) {
    for (auto& rs : rec_samples(*c)) {
      const auto& t = c->turns[rs.turn];
      auto tree = rs.tree;
      tree.connect(rs.target, kg, rs.round);
      const auto hist = history(*c, rs.turn, vocab);
      GenSample g;
      g.conversation_id = c->id;
      g.turn = rs.turn;
      g.round = rs.round;
      g.selection = generator::extract_context(tree, rs.target, hist, max_context);
      g.slot = rs.target;
      g.response = vocab.encode(t.response);
      g.reference = t.response;
      out.push_back(std::move(g));
    }
  }
  return out;
}

std::vector<std::vector<std::string>> vocabulary_corpus(std::span<const data::Conversation* const> conversations) {
  std::vector<std::vector<std::string>> out;
  for (const auto* c : conversations) {
    for (const auto& t : c->turns) {
      out.push_back(t.tokens);
      if (t.role == generator::Role::recommender) out.push_back(t.response);
    }
  }
  return out;
}

std::vector<bool> candidate_mask(const kg::KnowledgeGraph& kg, bool items_only) {
  return items_only ? reasoner::item_candidates(kg) : reasoner::all_candidates(kg);
}

}  // namespace trea::train
