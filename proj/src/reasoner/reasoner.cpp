#include "trea/reasoner/reasoner.hpp"

#include "trea/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace trea::reasoner {

namespace {

constexpr double kMinProbability = 1e-12;

ad::Tensor gather(const ad::Tensor& table, std::span<const long> ids) {
  if (ids.empty()) return ad::Tensor::zeros(0, table.cols());
  return ad::gather_rows(table, ids);
}

template <typename Id>
std::vector<long> to_rows(std::span<const Id> ids) {
  std::vector<long> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) rows.push_back(static_cast<long>(id.index));
  return rows;
}

ad::Tensor pool_or_zero(const ad::Tensor& x, const nn::LinearAttention& attn, Eigen::Index dim) {
  if (x.rows() == 0) return ad::Tensor::zeros(1, dim);
  return nn::linear_attention(x, attn);
}

}  // namespace

ReasonerParams ReasonerParams::make(const ReasonerConfig& config, nn::Initializer& init) {
  if (config.dim <= 0 || config.branch_length == 0) throw ConfigError("reasoner: dim and l_r must be positive");
  const auto d = config.dim;
  const auto da = config.effective_attention_dim();
  ReasonerParams p;
  p.position_embeddings =
      ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(config.branch_length), d, 0.1));
  p.branch_attention = nn::LinearAttention::make(d, da, init);
  p.semantic_attention = nn::LinearAttention::make(d, da, init);
  p.fusion_attention = nn::LinearAttention::make(d, da, init);
  p.current_entity_attention = nn::LinearAttention::make(d, da, init);
  p.current_word_attention = nn::LinearAttention::make(d, da, init);
  p.semantic_gate = nn::GateFusion::make(d, init);
  p.turn_inner_gate = nn::GateFusion::make(d, init);
  p.turn_outer_gate = nn::GateFusion::make(d, init);
  return p;
}

void ReasonerParams::register_into(nn::ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".position", position_embeddings);
  branch_attention.register_into(params, prefix + ".branch_attn");
  semantic_attention.register_into(params, prefix + ".semantic_attn");
  fusion_attention.register_into(params, prefix + ".fusion_attn");
  current_entity_attention.register_into(params, prefix + ".turn_entity_attn");
  current_word_attention.register_into(params, prefix + ".turn_word_attn");
  semantic_gate.register_into(params, prefix + ".semantic_gate");
  turn_inner_gate.register_into(params, prefix + ".turn_inner_gate");
  turn_outer_gate.register_into(params, prefix + ".turn_outer_gate");
}

ReasonerModel ReasonerModel::make(const kg::KnowledgeGraph& kg, const kg::WordGraph& wg,
                                  const ReasonerConfig& config, std::uint64_t seed) {
  nn::Initializer init(seed);
  ReasonerModel m;
  m.config = config;
  m.rgcn = encoders::RgcnParams::make(kg, config.dim, config.rgcn_layers, init);
  m.rgcn.activation = config.rgcn_activation;
  m.gcn = encoders::GcnParams::make(wg, config.dim, config.gcn_layers, init);
  m.head = ReasonerParams::make(config, init);
  m.kg_adjacency = encoders::RelationalAdjacency::build(kg);
  m.word_adjacency = encoders::normalized_adjacency(wg);
  return m;
}

nn::ParamSet ReasonerModel::params() const {
  nn::ParamSet ps;
  rgcn.register_into(ps, "rgcn");
  gcn.register_into(ps, "gcn");
  head.register_into(ps, "head");
  return ps;
}

ReasonerModel::Encoded ReasonerModel::encode() const {
  return {encoders::rgcn_forward(kg_adjacency, rgcn), encoders::gcn_forward(word_adjacency, gcn)};
}

std::vector<ad::Tensor> embed_branches(const tree::ReasoningTree& tree, const ad::Tensor& entities,
                                       const ReasonerParams& params, std::size_t branch_length) {
  if (static_cast<Eigen::Index>(branch_length) != params.position_embeddings.rows()) {
    throw ConfigError("embed_branches: l_r=" + std::to_string(branch_length) + " but position table has " +
                      std::to_string(params.position_embeddings.rows()) + " rows");
  }
  const auto branches = tree.branches();
  if (branches.empty()) throw EmptyInputError("embed_branches: tree has no branches");
  std::vector<ad::Tensor> out;
  out.reserve(branches.size());
  std::vector<long> rows(branch_length);
  for (const auto& branch : branches) {
    const auto slots = tree::truncate_pad(branch, branch_length);
    for (std::size_t i = 0; i < branch_length; ++i) rows[i] = slots[i] ? static_cast<long>(slots[i]->index) : -1;
    out.push_back(ad::add(ad::gather_rows(entities, rows), params.position_embeddings));
  }
  return out;
}

ad::Tensor pool_branches(std::span<const ad::Tensor> branches, const ReasonerParams& params) {
  if (branches.empty()) throw EmptyInputError("pool_branches: no branches");
  std::vector<ad::Tensor> pooled;
  pooled.reserve(branches.size());
  for (const auto& b : branches) pooled.push_back(nn::linear_attention(b, params.branch_attention));
  return ad::concat_rows(pooled);
}

ad::Tensor fuse_semantics(const ad::Tensor& pooled, const ad::Tensor& semantics, const ReasonerParams& params) {
  if (pooled.rows() == 0) throw EmptyInputError("fuse_semantics: no branches");
  return nn::linear_attention(nn::gate(pooled, semantics, params.semantic_gate), params.fusion_attention);
}

TurnEnhancement current_turn_enhance(const ad::Tensor& user, const ad::Tensor& turn_entities,
                                     const ad::Tensor& turn_words, const ReasonerParams& params) {
  const auto d = user.cols();
  TurnEnhancement out;
  out.entity_summary = pool_or_zero(turn_entities, params.current_entity_attention, d);
  out.word_summary = pool_or_zero(turn_words, params.current_word_attention, d);
  auto inner = nn::gate(out.entity_summary, out.word_summary, params.turn_inner_gate);
  out.user = nn::gate(user, inner, params.turn_outer_gate);
  return out;
}

ad::Tensor next_entity_logits(const ad::Tensor& user, const ad::Tensor& entities) {
  return ad::matmul_nt(user, entities);
}

kg::EntityId NextEntityDistribution::argmax() const {
  if (probs.empty()) throw EmptyInputError("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return kg::EntityId{static_cast<std::uint32_t>(best)};
}

std::vector<kg::EntityId> NextEntityDistribution::ranked(const std::vector<bool>& mask) const {
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (mask.empty() || mask[i]) ids.push_back(static_cast<std::uint32_t>(i));
  }
  std::stable_sort(ids.begin(), ids.end(), [&](auto a, auto b) { return probs[a] > probs[b]; });
  std::vector<kg::EntityId> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(kg::EntityId{i});
  return out;
}

NextEntityDistribution distribution_from_logits(const ad::Matrix& logits, const std::vector<bool>& candidate_mask) {
  const auto n = static_cast<std::size_t>(logits.size());
  if (!candidate_mask.empty() && candidate_mask.size() != n) {
    throw ContractError("candidate mask has " + std::to_string(candidate_mask.size()) + " entries for " +
                        std::to_string(n) + " entities");
  }
  auto allowed = [&](std::size_t i) { return candidate_mask.empty() || candidate_mask[i]; };
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (allowed(i)) max_logit = std::max(max_logit, logits(static_cast<Eigen::Index>(i)));
  }
  if (max_logit == -std::numeric_limits<double>::infinity()) {
    throw ContractError("next-entity distribution: every candidate is masked");
  }
  NextEntityDistribution out;
  out.probs.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!allowed(i)) continue;
    out.probs[i] = std::exp(logits(static_cast<Eigen::Index>(i)) - max_logit);
    total += out.probs[i];
  }
  for (auto& p : out.probs) p /= total;
  return out;
}

NextEntityDistribution next_entity_distribution(const ad::Tensor& user, const ad::Tensor& entities,
                                                const std::vector<bool>& candidate_mask) {
  ad::NoGradGuard guard;
  return distribution_from_logits(next_entity_logits(user, entities).value(), candidate_mask);
}

std::vector<bool> all_candidates(const kg::KnowledgeGraph& kg) { return std::vector<bool>(kg.entity_count(), true); }

std::vector<bool> item_candidates(const kg::KnowledgeGraph& kg) {
  std::vector<bool> mask(kg.entity_count(), false);
  for (const auto& rec : kg.entities()) mask[rec.id.index] = rec.is_item;
  return mask;
}

void exclude_mentioned(std::vector<bool>& mask, const tree::ReasoningTree& tree) {
  for (const auto& node : tree.nodes()) {
    if (node.entity && node.entity->index < mask.size()) mask[node.entity->index] = false;
  }
}

std::pair<kg::EntityId, tree::NodeId> select_and_connect(tree::ReasoningTree& tree,
                                                         const NextEntityDistribution& distribution,
                                                         const kg::KnowledgeGraph& kg, int turn_index) {
  const auto e = distribution.argmax();
  return {e, tree.connect(e, kg, turn_index)};
}

ReasoningOutput reason(const ReasoningInput& input, const ad::Tensor& entities, const ad::Tensor& words,
                       const ReasonerParams& params, const ReasonerConfig& config) {
  if (input.tree == nullptr) throw ContractError("reason: no tree supplied");
  const auto d = entities.cols();
  ReasoningOutput out;

  const auto ctx_rows = to_rows<kg::WordId>(input.context_words);
  out.semantics = pool_or_zero(gather(words, ctx_rows), params.semantic_attention, d);

  if (input.tree->empty()) {
    out.pooled_branches = ad::Tensor::zeros(0, d);
    out.user = out.semantics;
  } else {
    const auto branches = embed_branches(*input.tree, entities, params, config.branch_length);
    out.pooled_branches = pool_branches(branches, params);
    out.user = fuse_semantics(out.pooled_branches, out.semantics, params);
  }

  const auto ent_rows = to_rows<kg::EntityId>(input.turn_entities);
  const auto word_rows = to_rows<kg::WordId>(input.turn_words);
  out.turn = current_turn_enhance(out.user, gather(entities, ent_rows), gather(words, word_rows), params);
  out.logits = next_entity_logits(out.turn.user, entities);
  return out;
}

ad::Tensor isolation_loss(const ad::Tensor& pooled) {
  const auto n = pooled.rows();
  if (n < 2) return ad::Tensor::zeros(1, 1);
  std::vector<ad::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) rows.push_back(ad::slice_rows(pooled, i, 1));
  ad::Tensor total;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      auto c = ad::cosine(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
      total = total ? ad::add(total, c) : c;
    }
  }
  return total;
}

ad::Tensor alignment_loss(const ad::Tensor& entity_summary, const ad::Tensor& word_summary,
                          const ad::Tensor& user, const ad::Tensor& semantics, double lambda_c,
                          bool literal_sign) {
  if (!(lambda_c >= 0.0 && lambda_c <= 1.0)) throw ConfigError("lambda_c must lie in [0,1]");
  auto similarity = ad::add(ad::scale(ad::cosine(entity_summary, word_summary), lambda_c),
                            ad::scale(ad::cosine(user, semantics), 1.0 - lambda_c));
  return literal_sign ? similarity : ad::scale(similarity, -1.0);
}

ReasoningTerm make_term(const ReasoningOutput& out, kg::EntityId target, std::vector<bool> candidate_mask) {
  return {out.logits,          target,       out.pooled_branches, out.turn.entity_summary,
          out.turn.word_summary, out.user,   out.semantics,       std::move(candidate_mask)};
}

ReasoningLoss reasoning_loss(std::span<const ReasoningTerm> batch, const ReasonerConfig& config) {
  if (batch.empty()) throw EmptyInputError("reasoning_loss: empty batch");
  ReasoningLoss out;
  std::vector<ad::Tensor> terms;
  terms.reserve(batch.size() * 3);
  for (const auto& s : batch) {
    const auto n = s.logits.cols();
    if (static_cast<Eigen::Index>(s.target.index) >= n) {
      throw ContractError("reasoning_loss: target " + std::to_string(s.target.index) + " outside " +
                          std::to_string(n) + " candidates");
    }
    ad::Tensor logits = s.logits;
    if (!s.candidate_mask.empty()) {
      if (static_cast<Eigen::Index>(s.candidate_mask.size()) != n) {
        throw ContractError("reasoning_loss: candidate mask size mismatch");
      }
      if (!s.candidate_mask[s.target.index]) throw ContractError("reasoning_loss: target is masked");
      ad::Matrix offset = ad::Matrix::Zero(1, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!s.candidate_mask[static_cast<std::size_t>(i)]) offset(0, i) = -std::numeric_limits<double>::infinity();
      }
      logits = ad::add(logits, ad::Tensor::constant(std::move(offset)));
    }
    auto logp = ad::pick(ad::log_softmax_rows(logits), 0, s.target.index);
    if (logp.scalar() < std::log(kMinProbability)) {
      ++out.clamped;
      spdlog::warn("target probability for entity {} below {:g}; clamping", s.target.index, kMinProbability);
      terms.push_back(ad::Tensor::constant(ad::Matrix::Constant(1, 1, -std::log(kMinProbability))));
    } else {
      terms.push_back(ad::scale(logp, -1.0));
    }
    out.cross_entropy += terms.back().scalar();

    if (config.lambda_iso != 0.0 && s.pooled_branches && s.pooled_branches.rows() >= 2) {
      auto iso = isolation_loss(s.pooled_branches);
      out.isolation += iso.scalar();
      terms.push_back(ad::scale(iso, config.lambda_iso));
    }
    if (config.lambda_align != 0.0) {
      auto aln = alignment_loss(s.entity_summary, s.word_summary, s.user, s.semantics, config.lambda_c,
                                config.literal_alignment_sign);
      out.alignment += aln.scalar();
      terms.push_back(ad::scale(aln, config.lambda_align));
    }
  }
  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = ad::add(out.total, terms[i]);
  return out;
}

}  // namespace trea::reasoner
