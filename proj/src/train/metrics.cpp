#include "trea/train/metrics.hpp"

#include "trea/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace trea::train {

double recall_at_k(std::span<const Ranking> ranked, std::span<const kg::EntityId> truth, std::size_t k) {
  if (k == 0) throw ConfigError("recall_at_k: k must be at least 1");
  if (ranked.size() != truth.size()) throw ContractError("recall_at_k: rankings and truths differ in count");
  if (ranked.empty()) throw EmptyInputError("recall_at_k: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto end = ranked[i].begin() + static_cast<long>(std::min(k, ranked[i].size()));
    if (std::find(ranked[i].begin(), end, truth[i]) != end) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

namespace {

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<NGram, std::size_t> out;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[NGram(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n))];
  return out;
}

}  // namespace

double distinct_n(std::span<const Sentence> corpus, std::size_t n) {
  if (n == 0) throw ConfigError("distinct_n: n must be at least 1");
  std::set<NGram> distinct;
  std::size_t total = 0;
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      distinct.emplace(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i + n));
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(distinct.size()) / static_cast<double>(total);
}

double bleu_n(std::span<const Sentence> hypotheses, std::span<const Sentence> references, std::size_t n) {
  if (n == 0) throw ConfigError("bleu_n: n must be at least 1");
  if (hypotheses.size() != references.size()) throw ContractError("bleu_n: hypothesis and reference counts differ");
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    hyp_len += hypotheses[i].size();
    ref_len += references[i].size();
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t m = 1; m <= n; ++m) {
    std::size_t matched = 0, total = 0;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      const auto hyp = ngram_counts(hypotheses[i], m);
      const auto ref = ngram_counts(references[i], m);
      for (const auto& [g, c] : hyp) {
        total += c;
        const auto it = ref.find(g);
        if (it != ref.end()) matched += std::min(c, it->second);
      }
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(total));
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return bp * std::exp(log_sum / static_cast<double>(n));
}

double perplexity(double total_nll, std::size_t tokens) {
  if (tokens == 0) throw EmptyInputError("perplexity: no tokens");
  return std::exp(total_nll / static_cast<double>(tokens));
}

std::vector<RoundBucket> eval_by_rounds(std::span<const int> rounds, std::span<const Ranking> ranked,
                                        std::span<const kg::EntityId> truth, std::span<const int> edges,
                                        std::size_t k) {
  if (rounds.size() != ranked.size() || ranked.size() != truth.size()) {
    throw ContractError("eval_by_rounds: rounds, rankings and truths differ in count");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) throw ConfigError("eval_by_rounds: edges must be strictly increasing");
  }
  if (!edges.empty() && edges.front() <= 0) throw ConfigError("eval_by_rounds: edges must be positive");
  if (std::any_of(rounds.begin(), rounds.end(), [](int r) { return r < 0; })) {
    throw ContractError("eval_by_rounds: rounds must be non-negative");
  }
  std::vector<RoundBucket> buckets;
  int lo = 0;
  for (std::size_t b = 0; b <= edges.size(); ++b) {
    RoundBucket bucket;
    bucket.lo = lo;
    if (b < edges.size()) bucket.hi = edges[b];
    bucket.label = "[" + std::to_string(lo) + "," + (bucket.hi ? std::to_string(*bucket.hi) : std::string("inf")) + ")";
    std::vector<Ranking> r;
    std::vector<kg::EntityId> t;
    for (std::size_t i = 0; i < rounds.size(); ++i) {
      if (rounds[i] >= lo && (!bucket.hi || rounds[i] < *bucket.hi)) {
        r.push_back(ranked[i]);
        t.push_back(truth[i]);
      }
    }
    bucket.count = r.size();
    if (!r.empty()) bucket.recall = recall_at_k(r, t, k);
    if (bucket.hi) lo = *bucket.hi;
    buckets.push_back(std::move(bucket));
  }
  return buckets;
}

nlohmann::json EvalReport::to_json() const {
  using nlohmann::json;
  auto table = [](const std::map<std::size_t, double>& m) {
    json out = json::object();
    for (const auto& [k, v] : m) out[std::to_string(k)] = v;
    return out;
  };
  json rounds = json::object();
  for (const auto& b : per_round) {
    rounds[b.label] = {{"count", b.count}, {"recall50", b.recall ? json(*b.recall) : json(nullptr)}};
  }
  return {{"recall", table(recall)},
          {"dist", table(dist)},
          {"bleu", table(bleu)},
          {"ppl", ppl ? json(*ppl) : json(nullptr)},
          {"per_round", rounds},
          {"rec_samples", rec_samples},
          {"gen_samples", gen_samples}};
}

}  // namespace trea::train
