#pragma once

#include "trea/ad/tensor.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/linker.hpp"
#include "trea/nn/layers.hpp"
#include "trea/nn/params.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace trea::generator {

using TokenId = int;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kItem = 4;
inline constexpr TokenId kUserRole = 5;
inline constexpr TokenId kRecRole = 6;
inline constexpr TokenId kContext = 7;

inline constexpr const char* kItemToken = "__item__";

class Vocabulary {
 public:
  /// Reserved tokens only.
  Vocabulary();

  /// Reserved tokens, then every corpus token seen at least `min_count`
  /// times ordered by descending frequency (ties alphabetical).
  static Vocabulary build(std::span<const std::vector<std::string>> corpus, std::size_t min_count = 1);

  std::size_t size() const { return tokens_.size(); }
  /// Unknown tokens map to kUnk.
  TokenId id(const std::string& token) const;
  const std::string& token(TokenId id) const;
  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  void save(const std::filesystem::path& path) const;
  /// Throws ValidationError if the reserved block is not intact.
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  explicit Vocabulary(std::vector<std::string> tokens);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct GeneratorConfig {
  Eigen::Index dim = 128;
  int layers = 2;
  int heads = 2;
  Eigen::Index ffn_dim = 512;
  int encoder_layers = 2;
  /// Width of the reasoner's entity embeddings fed through the projection.
  Eigen::Index entity_dim = 300;
  std::size_t max_context = 256;
  std::size_t max_response = 48;
  bool drop_entities = false;
  bool drop_utterances = false;
};

struct EncoderLayer {
  nn::LayerNorm attn_norm;
  nn::MultiHeadAttention attn;
  nn::LayerNorm ffn_norm;
  nn::FeedForward ffn;
};

struct DecoderLayer {
  nn::LayerNorm self_norm;
  nn::MultiHeadAttention self_attn;
  nn::LayerNorm entity_norm;
  nn::MultiHeadAttention entity_attn;
  nn::LayerNorm utterance_norm;
  nn::MultiHeadAttention utterance_attn;
  nn::LayerNorm ffn_norm;
  nn::FeedForward ffn;
};

struct GeneratorParams {
  ad::Tensor vocab_embeddings;     // V: |V| x d_g, shared by encoder, decoder and output layer
  ad::Tensor encoder_positions;    // (max_context + 1) x d_g
  ad::Tensor decoder_positions;    // (max_response + 1) x d_g
  std::vector<EncoderLayer> encoder;
  nn::LayerNorm encoder_norm;
  std::vector<DecoderLayer> decoder;
  nn::LayerNorm decoder_norm;
  nn::Linear entity_projection;    // entity_dim -> d_g
  nn::LinearAttention copy_attention;
  nn::FeedForward copy_ffn;        // 2 d_g -> d_b
  ad::Tensor copy_output;          // W^v: d_b x |V|

  static GeneratorParams make(const GeneratorConfig& config, std::size_t vocab_size, nn::Initializer& init);
  void register_into(nn::ParamSet& params, const std::string& prefix) const;
  nn::ParamSet params() const;
  std::size_t vocab_size() const { return static_cast<std::size_t>(vocab_embeddings.rows()); }
};

enum class Role { user, recommender };

struct Utterance {
  Role role = Role::user;
  std::vector<TokenId> tokens;
  std::vector<kg::EntityId> entities;
};

/// Which entities and utterance tokens the decoder will attend to.
struct ContextSelection {
  std::vector<kg::EntityId> entities;  // first-seen order along the selected branches
  std::vector<TokenId> tokens;         // role-prefixed, chronological, most recent max_tokens kept
};

struct GenerationContext {
  ad::Tensor entities;     // E, projected to d_g
  ad::Tensor utterances;   // U
  std::optional<kg::EntityId> slot_filler;
};

ContextSelection extract_context(const tree::ReasoningTree& tree, kg::EntityId new_entity,
                                 std::span<const Utterance> history, std::size_t max_tokens);

/// Self-attention encoder over `__ctx__` followed by `tokens`; returns one
/// row per input token plus one. Ids outside the vocabulary become UNK.
ad::Tensor encode_utterances(std::span<const TokenId> tokens, const GeneratorParams& params);

/// E and U tensors for a selection. `entity_table` holds the reasoner's
/// (frozen) entity embeddings.
GenerationContext build_context(const ContextSelection& selection, const ad::Tensor& entity_table,
                                const GeneratorParams& params, const GeneratorConfig& config,
                                std::optional<kg::EntityId> slot_filler = std::nullopt);

/// Pre-softmax scores for every prefix position: n x |V|.
ad::Tensor decoder_logits(std::span<const TokenId> prefix, const GenerationContext& ctx,
                          const GeneratorParams& params);

/// Next-token distribution after `prefix` (which must start with BOS).
std::vector<double> decode_step(std::span<const TokenId> prefix, const GenerationContext& ctx,
                                const GeneratorParams& params);

struct MaskedResponse {
  std::vector<std::string> tokens;
  std::vector<std::size_t> slots;
  std::vector<kg::EntityId> items;
};

/// Replaces each item mention with `__item__`; slots index the masked list.
MaskedResponse mask_items(std::span<const std::string> tokens, const kg::EntityLinker& linker,
                          const kg::KnowledgeGraph& kg);

struct DecodeMode {
  std::size_t beam = 1;  // 1 is greedy
  static DecodeMode greedy() { return {1}; }
  static DecodeMode beam_search(std::size_t k) { return {k}; }
};

struct Generated {
  std::vector<TokenId> ids;          // without BOS/EOS
  std::vector<std::string> tokens;   // rendered, slot filled
  std::string text() const;
};

/// At most `max_len` tokens, EOS excluded.
Generated generate(const GenerationContext& ctx, const GeneratorParams& params, const Vocabulary& vocab,
                   const kg::KnowledgeGraph& kg, std::size_t max_len, DecodeMode mode = DecodeMode::greedy());

struct GenerationExample {
  GenerationContext context;
  std::vector<TokenId> response;  // masked target, without BOS/EOS
};

struct GenerationLoss {
  ad::Tensor total;          // mean over responses of the per-token mean NLL
  double token_nll = 0.0;    // summed over all predicted tokens
  std::size_t tokens = 0;
};

/// Teacher-forced cross-entropy; each response is followed by EOS and cut
/// to max_response tokens.
GenerationLoss generation_loss(std::span<const GenerationExample> batch, const GeneratorParams& params,
                               std::size_t max_response);

}  // namespace trea::generator
