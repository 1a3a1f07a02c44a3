#pragma once

#include "trea/ad/tensor.hpp"
#include "trea/encoders/graph_encoders.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"
#include "trea/nn/layers.hpp"
#include "trea/nn/params.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace trea::reasoner {

struct ReasonerConfig {
  Eigen::Index dim = 300;
  /// Hidden width of the additive attention scorers; 0 means `dim`.
  Eigen::Index attention_dim = 0;
  std::size_t branch_length = 10;
  int rgcn_layers = 1;
  int gcn_layers = 1;
  encoders::Activation rgcn_activation = encoders::Activation::sigmoid;
  double lambda_c = 0.9;
  double lambda_iso = 0.008;
  double lambda_align = 0.002;
  /// Minimise +similarity instead of -similarity in the alignment term.
  bool literal_alignment_sign = false;
  /// Mask entities already present in the tree out of next-hop candidates.
  bool exclude_mentioned = false;

  Eigen::Index effective_attention_dim() const { return attention_dim > 0 ? attention_dim : dim; }
};

struct ReasonerParams {
  ad::Tensor position_embeddings;  // branch_length x dim
  nn::LinearAttention branch_attention;
  nn::LinearAttention semantic_attention;
  nn::LinearAttention fusion_attention;
  nn::LinearAttention current_entity_attention;
  nn::LinearAttention current_word_attention;
  nn::GateFusion semantic_gate;
  nn::GateFusion turn_inner_gate;
  nn::GateFusion turn_outer_gate;

  static ReasonerParams make(const ReasonerConfig& config, nn::Initializer& init);
  void register_into(nn::ParamSet& params, const std::string& prefix) const;
};

/// Every learnable tensor of the reasoning side: both graph encoders and
/// the scoring head, plus the fixed graph operators they run over.
struct ReasonerModel {
  ReasonerConfig config;
  encoders::RgcnParams rgcn;
  encoders::GcnParams gcn;
  ReasonerParams head;
  encoders::RelationalAdjacency kg_adjacency;
  ad::SparseMatrix word_adjacency;

  static ReasonerModel make(const kg::KnowledgeGraph& kg, const kg::WordGraph& wg, const ReasonerConfig& config,
                            std::uint64_t seed);
  nn::ParamSet params() const;

  struct Encoded {
    ad::Tensor entities;
    ad::Tensor words;
  };
  Encoded encode() const;
};

// --- branch representations ----------------------------------------------

/// One l_r x d matrix per branch (in branches() order): entity embedding
/// plus position embedding per slot; padded slots carry the position only.
std::vector<ad::Tensor> embed_branches(const tree::ReasoningTree& tree, const ad::Tensor& entities,
                                       const ReasonerParams& params, std::size_t branch_length);

/// n_r x d: each branch pooled with the branch attention.
ad::Tensor pool_branches(std::span<const ad::Tensor> branches, const ReasonerParams& params);

/// Gates every pooled branch against the dialogue semantics and pools the
/// result into the user representation p (1 x d).
ad::Tensor fuse_semantics(const ad::Tensor& pooled, const ad::Tensor& semantics, const ReasonerParams& params);

struct TurnEnhancement {
  ad::Tensor user;              // p_u
  ad::Tensor entity_summary;    // p_c, pooled current-turn entities (zero if none)
  ad::Tensor word_summary;      // s_c, pooled current-turn words (zero if none)
};

/// Either input may have zero rows; an empty set contributes a zero vector.
TurnEnhancement current_turn_enhance(const ad::Tensor& user, const ad::Tensor& turn_entities,
                                     const ad::Tensor& turn_words, const ReasonerParams& params);

// --- next-hop prediction --------------------------------------------------

/// 1 x n scores p_u . e_i.
ad::Tensor next_entity_logits(const ad::Tensor& user, const ad::Tensor& entities);

struct NextEntityDistribution {
  std::vector<double> probs;

  /// Highest probability; the lowest id wins ties.
  kg::EntityId argmax() const;
  /// Ids sorted by probability descending, ties by id; masked ids excluded.
  std::vector<kg::EntityId> ranked(const std::vector<bool>& mask) const;
};

/// Masked softmax with max subtraction. Masked entries are exactly 0.
/// Throws ContractError when every entry is masked.
NextEntityDistribution next_entity_distribution(const ad::Tensor& user, const ad::Tensor& entities,
                                                const std::vector<bool>& candidate_mask);
NextEntityDistribution distribution_from_logits(const ad::Matrix& logits, const std::vector<bool>& candidate_mask);

std::vector<bool> all_candidates(const kg::KnowledgeGraph& kg);
std::vector<bool> item_candidates(const kg::KnowledgeGraph& kg);
/// Clears the entries of entities already mentioned in `tree`.
void exclude_mentioned(std::vector<bool>& mask, const tree::ReasoningTree& tree);

std::pair<kg::EntityId, tree::NodeId> select_and_connect(tree::ReasoningTree& tree,
                                                         const NextEntityDistribution& distribution,
                                                         const kg::KnowledgeGraph& kg, int turn_index = 0);

// --- full forward ---------------------------------------------------------

struct ReasoningInput {
  const tree::ReasoningTree* tree = nullptr;
  std::vector<kg::WordId> context_words;
  std::vector<kg::EntityId> turn_entities;
  std::vector<kg::WordId> turn_words;
};

struct ReasoningOutput {
  ad::Tensor pooled_branches;  // n_r x d; zero rows for an empty tree
  ad::Tensor semantics;        // s
  ad::Tensor user;             // p
  TurnEnhancement turn;
  ad::Tensor logits;           // 1 x n
};

/// With an empty tree the branch path is skipped and p = s.
ReasoningOutput reason(const ReasoningInput& input, const ad::Tensor& entities, const ad::Tensor& words,
                       const ReasonerParams& params, const ReasonerConfig& config);

// --- losses ---------------------------------------------------------------

/// Sum over unordered branch pairs of their cosine similarity.
ad::Tensor isolation_loss(const ad::Tensor& pooled);

/// -(lambda_c cos(p_c, s_c) + (1 - lambda_c) cos(p, s)); the sign flips
/// when `literal_sign` is set.
ad::Tensor alignment_loss(const ad::Tensor& entity_summary, const ad::Tensor& word_summary,
                          const ad::Tensor& user, const ad::Tensor& semantics, double lambda_c,
                          bool literal_sign = false);

struct ReasoningTerm {
  ad::Tensor logits;   // 1 x n
  kg::EntityId target;
  ad::Tensor pooled_branches;
  ad::Tensor entity_summary;
  ad::Tensor word_summary;
  ad::Tensor user;
  ad::Tensor semantics;
  std::vector<bool> candidate_mask;  // empty = all candidates
};

ReasoningTerm make_term(const ReasoningOutput& out, kg::EntityId target, std::vector<bool> candidate_mask = {});

struct ReasoningLoss {
  ad::Tensor total;
  double cross_entropy = 0.0;
  double isolation = 0.0;
  double alignment = 0.0;
  std::size_t clamped = 0;
};

/// Sum over the batch of -log P[target] + lambda_iso L_I + lambda_align L_a.
/// Target probabilities below 1e-12 are clamped (with a warning).
ReasoningLoss reasoning_loss(std::span<const ReasoningTerm> batch, const ReasonerConfig& config);

}  // namespace trea::reasoner
