#include "trea/app/session.hpp"

#include "trea/error.hpp"
#include "trea/kg/linker.hpp"
#include "trea/kg/text.hpp"
#include "trea/train/samples.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace trea::app {

Session::Session(const Model& model, const Resources& resources, SessionOptions options)
    : model_(model), resources_(resources), options_(options) {
  if (!model.generator || !model.vocab) throw ValidationError("model has no generator; run `trea train-gen` first");
  ad::NoGradGuard guard;
  const auto enc = model.reasoner.encode();
  entities_ = ad::Tensor::constant(enc.entities.value());
  words_ = ad::Tensor::constant(enc.words.value());
  frozen_entities_ = entities_;
}

TurnResult Session::user_turn(const std::string& text) {
  ad::NoGradGuard guard;
  const auto& kg = resources_.kg;
  const kg::EntityLinker linker(kg);
  TurnResult out;
  out.round = ++round_;

  const auto tokens = kg::tokenize(text);
  for (const auto& m : linker.mentions(tokens)) out.linked.push_back(m.entity);
  const auto turn_words = kg::link_words(tokens, resources_.words);
  for (auto e : out.linked) tree_.connect(e, kg, out.round);
  context_words_.insert(context_words_.end(), turn_words.begin(), turn_words.end());
  history_.push_back({generator::Role::user, model_.vocab->encode(tokens), out.linked});

  const reasoner::ReasoningInput input{&tree_, context_words_, out.linked, turn_words};
  const auto reasoned = reasoner::reason(input, entities_, words_, model_.reasoner.head, model_.reasoner.config);
  auto mask = train::candidate_mask(kg, options_.items_only);
  if (options_.exclude_mentioned) {
    auto narrowed = mask;
    reasoner::exclude_mentioned(narrowed, tree_);
    if (std::find(narrowed.begin(), narrowed.end(), true) != narrowed.end()) mask = std::move(narrowed);
  }
  const auto ranked = reasoner::distribution_from_logits(reasoned.logits.value(), mask).ranked(mask);
  out.chosen = ranked.front();
  out.recommended.assign(ranked.begin(), ranked.begin() + static_cast<long>(std::min(options_.top_k, ranked.size())));
  ++round_;
  tree_.connect(out.chosen, kg, round_);

  const auto selection =
      generator::extract_context(tree_, out.chosen, history_, model_.config.max_context);
  const auto ctx = generator::build_context(selection, frozen_entities_, *model_.generator,
                                            model_.config.generator_config(), out.chosen);
  const auto generated = generator::generate(ctx, *model_.generator, *model_.vocab, kg, options_.max_len, options_.mode);
  out.response = generated.text();

  history_.push_back({generator::Role::recommender, generated.ids, {out.chosen}});
  const auto response_words = kg::link_words(kg::tokenize(out.response), resources_.words);
  context_words_.insert(context_words_.end(), response_words.begin(), response_words.end());
  out.tree = tree_;
  return out;
}

std::string format_turn(const TurnResult& turn, const kg::KnowledgeGraph& kg) {
  auto names = [&](const std::vector<kg::EntityId>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i) s += ' ';
      s += kg.surface(ids[i]);
    }
    return s.empty() ? std::string("-") : s;
  };
  return "[" + std::to_string(turn.round) + "] linked: " + names(turn.linked) + "\n[" +
         std::to_string(turn.round + 1) + "] top-" + std::to_string(turn.recommended.size()) + ": " +
         names(turn.recommended) + "\n[" + std::to_string(turn.round + 1) + "] " + turn.response + "\n";
}

int chat_repl(std::istream& in, std::ostream& out, Session& session, const kg::KnowledgeGraph& kg) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == ":quit") return 0;
    if (line == ":tree") {
      out << session.tree().to_dot(&kg);
      continue;
    }
    if (line.rfind(":topk", 0) == 0) {
      const auto arg = kg::normalize(line.substr(5));
      std::size_t k = 0;
      try {
        k = std::stoul(arg);
      } catch (const std::exception&) {
      }
      if (k == 0) {
        out << "usage: :topk N (N >= 1)\n";
      } else {
        session.options().top_k = k;
      }
      continue;
    }
    if (line.front() == ':') {
      out << "unknown command " << line << "\n";
      continue;
    }
    out << "> " << line << "\n" << format_turn(session.user_turn(line), kg);
    out.flush();
  }
  return 0;
}

}  // namespace trea::app
