#pragma once

#include "trea/kg/knowledge_graph.hpp"

#include "json.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trea::train {

using Ranking = std::vector<kg::EntityId>;
using Sentence = std::vector<std::string>;

/// Fraction of samples whose truth is among the first k ranked ids.
/// Throws ConfigError for k = 0 and EmptyInputError for no samples.
double recall_at_k(std::span<const Ranking> ranked, std::span<const kg::EntityId> truth, std::size_t k);

/// Distinct n-grams over n-gram occurrences across the corpus; 0 when the
/// corpus has no n-grams.
double distinct_n(std::span<const Sentence> corpus, std::size_t n);

/// Corpus BLEU with uniform weights over orders 1..n, one reference per
/// hypothesis, brevity penalty and no smoothing.
double bleu_n(std::span<const Sentence> hypotheses, std::span<const Sentence> references, std::size_t n);

/// exp(nll / tokens); EmptyInputError when tokens is 0.
double perplexity(double total_nll, std::size_t tokens);

struct RoundBucket {
  std::string label;  // "[lo,hi)"
  int lo = 0;
  std::optional<int> hi;  // open-ended last bucket
  std::size_t count = 0;
  std::optional<double> recall;  // empty when count is 0
};

/// Buckets [0,e0), [e0,e1), ..., [e_last,inf) by conversation round, each
/// with Recall@k. Edges must be strictly increasing.
std::vector<RoundBucket> eval_by_rounds(std::span<const int> rounds, std::span<const Ranking> ranked,
                                        std::span<const kg::EntityId> truth, std::span<const int> edges,
                                        std::size_t k = 50);

struct EvalReport {
  std::map<std::size_t, double> recall;
  std::map<std::size_t, double> dist;
  std::map<std::size_t, double> bleu;
  std::optional<double> ppl;
  std::vector<RoundBucket> per_round;
  std::size_t rec_samples = 0;
  std::size_t gen_samples = 0;

  nlohmann::json to_json() const;
};

}  // namespace trea::train
