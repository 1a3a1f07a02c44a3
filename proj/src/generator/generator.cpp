#include "trea/generator/generator.hpp"

#include "trea/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace trea::generator {

namespace {

const std::array<const char*, 8> kReserved{"__pad__", "__bos__", "__eos__", "__unk__",
                                           kItemToken, "__user__", "__rec__", "__ctx__"};

constexpr double kMinProbability = 1e-12;

ad::Tensor embed(std::span<const TokenId> ids, const ad::Tensor& table, const ad::Tensor& positions) {
  if (static_cast<Eigen::Index>(ids.size()) > positions.rows()) {
    throw ContractError("sequence of " + std::to_string(ids.size()) + " tokens exceeds the position table (" +
                        std::to_string(positions.rows()) + ")");
  }
  std::vector<long> rows;
  rows.reserve(ids.size());
  for (auto id : ids) rows.push_back(id >= 0 && id < table.rows() ? id : kUnk);
  return ad::add(ad::gather_rows(table, rows), ad::slice_rows(positions, 0, static_cast<Eigen::Index>(ids.size())));
}

void register_layer(nn::ParamSet& ps, const EncoderLayer& l, const std::string& p) {
  l.attn_norm.register_into(ps, p + ".attn_norm");
  l.attn.register_into(ps, p + ".attn");
  l.ffn_norm.register_into(ps, p + ".ffn_norm");
  l.ffn.register_into(ps, p + ".ffn");
}

void register_layer(nn::ParamSet& ps, const DecoderLayer& l, const std::string& p) {
  l.self_norm.register_into(ps, p + ".self_norm");
  l.self_attn.register_into(ps, p + ".self_attn");
  l.entity_norm.register_into(ps, p + ".entity_norm");
  l.entity_attn.register_into(ps, p + ".entity_attn");
  l.utterance_norm.register_into(ps, p + ".utterance_norm");
  l.utterance_attn.register_into(ps, p + ".utterance_attn");
  l.ffn_norm.register_into(ps, p + ".ffn_norm");
  l.ffn.register_into(ps, p + ".ffn");
}

std::vector<double> softmax_row(const ad::Matrix& logits, Eigen::Index row) {
  const double m = logits.row(row).maxCoeff();
  std::vector<double> out(static_cast<std::size_t>(logits.cols()));
  double total = 0.0;
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    out[static_cast<std::size_t>(j)] = std::exp(logits(row, j) - m);
    total += out[static_cast<std::size_t>(j)];
  }
  for (auto& p : out) p /= total;
  return out;
}

}  // namespace

// --- vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>(kReserved.begin(), kReserved.end())) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  for (const char* r : kReserved) counts.erase(r);
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(kReserved.begin(), kReserved.end());
  for (const auto& [tok, n] : ranked) {
    if (n >= min_count) tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

TokenId Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnk];
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw ValidationError("failed to write vocabulary " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (tokens.size() < kReserved.size()) throw ValidationError(path.string() + ": reserved tokens missing");
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    if (tokens[i] != kReserved[i]) {
      throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": expected reserved token " + kReserved[i]);
    }
  }
  return Vocabulary(std::move(tokens));
}

// --- parameters -------------------------------------------------------------

GeneratorParams GeneratorParams::make(const GeneratorConfig& config, std::size_t vocab_size, nn::Initializer& init) {
  const auto d = config.dim;
  if (d <= 0 || config.layers <= 0 || config.encoder_layers <= 0 || config.ffn_dim <= 0 || config.entity_dim <= 0) {
    throw ConfigError("generator: dimensions and layer counts must be positive");
  }
  if (vocab_size < kReserved.size()) throw ConfigError("generator: vocabulary lacks reserved tokens");
  const double embed_limit = std::sqrt(3.0 / static_cast<double>(d));
  GeneratorParams p;
  p.vocab_embeddings = ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(vocab_size), d, embed_limit));
  p.encoder_positions =
      ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(config.max_context + 1), d, embed_limit));
  p.decoder_positions =
      ad::Tensor::parameter(init.uniform(static_cast<Eigen::Index>(config.max_response + 1), d, embed_limit));
  for (int l = 0; l < config.encoder_layers; ++l) {
    p.encoder.push_back({nn::LayerNorm::make(d), nn::MultiHeadAttention::make(d, config.heads, init),
                         nn::LayerNorm::make(d), nn::FeedForward::make(d, config.ffn_dim, d, init)});
  }
  p.encoder_norm = nn::LayerNorm::make(d);
  for (int l = 0; l < config.layers; ++l) {
    p.decoder.push_back({nn::LayerNorm::make(d), nn::MultiHeadAttention::make(d, config.heads, init),
                         nn::LayerNorm::make(d), nn::MultiHeadAttention::make(d, config.heads, init),
                         nn::LayerNorm::make(d), nn::MultiHeadAttention::make(d, config.heads, init),
                         nn::LayerNorm::make(d), nn::FeedForward::make(d, config.ffn_dim, d, init)});
  }
  p.decoder_norm = nn::LayerNorm::make(d);
  p.entity_projection = nn::Linear::make(config.entity_dim, d, init);
  p.copy_attention = nn::LinearAttention::make(d, d, init);
  p.copy_ffn = nn::FeedForward::make(2 * d, d, d, init);
  p.copy_output = ad::Tensor::parameter(init.xavier(d, static_cast<Eigen::Index>(vocab_size)));
  return p;
}

void GeneratorParams::register_into(nn::ParamSet& ps, const std::string& prefix) const {
  ps.add(prefix + ".vocab", vocab_embeddings);
  ps.add(prefix + ".encoder_pos", encoder_positions);
  ps.add(prefix + ".decoder_pos", decoder_positions);
  for (std::size_t l = 0; l < encoder.size(); ++l) register_layer(ps, encoder[l], prefix + ".enc" + std::to_string(l));
  encoder_norm.register_into(ps, prefix + ".enc_norm");
  for (std::size_t l = 0; l < decoder.size(); ++l) register_layer(ps, decoder[l], prefix + ".dec" + std::to_string(l));
  decoder_norm.register_into(ps, prefix + ".dec_norm");
  entity_projection.register_into(ps, prefix + ".entity_proj");
  copy_attention.register_into(ps, prefix + ".copy_attn");
  copy_ffn.register_into(ps, prefix + ".copy_ffn");
  ps.add(prefix + ".copy_out", copy_output);
}

nn::ParamSet GeneratorParams::params() const {
  nn::ParamSet ps;
  register_into(ps, "gen");
  return ps;
}

// --- context ----------------------------------------------------------------

ContextSelection extract_context(const tree::ReasoningTree& tree, kg::EntityId new_entity,
                                 std::span<const Utterance> history, std::size_t max_tokens) {
  ContextSelection sel;
  std::set<kg::EntityId> seen;
  for (const auto& branch : tree.branches_containing(new_entity)) {
    for (auto e : branch.entities) {
      if (seen.insert(e).second) sel.entities.push_back(e);
    }
  }
  for (const auto& utt : history) {
    const bool relevant = std::any_of(utt.entities.begin(), utt.entities.end(), [&](kg::EntityId e) { return seen.count(e) > 0; });
    if (!relevant) continue;
    sel.tokens.push_back(utt.role == Role::user ? kUserRole : kRecRole);
    sel.tokens.insert(sel.tokens.end(), utt.tokens.begin(), utt.tokens.end());
  }
  if (sel.tokens.size() > max_tokens) {
    sel.tokens.erase(sel.tokens.begin(), sel.tokens.end() - static_cast<long>(max_tokens));
  }
  return sel;
}

ad::Tensor encode_utterances(std::span<const TokenId> tokens, const GeneratorParams& params) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(kContext);
  ids.insert(ids.end(), tokens.begin(), tokens.end());
  ad::Tensor x = embed(ids, params.vocab_embeddings, params.encoder_positions);
  for (const auto& layer : params.encoder) {
    auto h = layer.attn_norm(x);
    x = ad::add(x, layer.attn(h, h, false));
    x = ad::add(x, layer.ffn(layer.ffn_norm(x)));
  }
  return params.encoder_norm(x);
}

GenerationContext build_context(const ContextSelection& selection, const ad::Tensor& entity_table,
                                const GeneratorParams& params, const GeneratorConfig& config,
                                std::optional<kg::EntityId> slot_filler) {
  const auto d = params.vocab_embeddings.cols();
  GenerationContext ctx;
  ctx.slot_filler = slot_filler;
  if (config.drop_entities) {
    ctx.entities = ad::Tensor::zeros(1, d);
  } else {
    if (selection.entities.empty()) throw ContractError("build_context: no entities selected");
    std::vector<long> rows;
    for (auto e : selection.entities) rows.push_back(static_cast<long>(e.index));
    ctx.entities = params.entity_projection(ad::gather_rows(entity_table, rows));
  }
  ctx.utterances = config.drop_utterances ? ad::Tensor::zeros(1, d) : encode_utterances(selection.tokens, params);
  return ctx;
}

// --- decoding ---------------------------------------------------------------

ad::Tensor decoder_logits(std::span<const TokenId> prefix, const GenerationContext& ctx,
                          const GeneratorParams& params) {
  if (prefix.empty()) throw ContractError("decoder: empty prefix");
  if (!ctx.entities || ctx.entities.rows() == 0) throw ContractError("decoder: entity memory is empty");
  if (!ctx.utterances || ctx.utterances.rows() == 0) throw ContractError("decoder: utterance memory is empty");
  ad::Tensor x = embed(prefix, params.vocab_embeddings, params.decoder_positions);
  for (const auto& layer : params.decoder) {
    auto h = layer.self_norm(x);
    x = ad::add(x, layer.self_attn(h, h, true));
    x = ad::add(x, layer.entity_attn(layer.entity_norm(x), ctx.entities, false));
    x = ad::add(x, layer.utterance_attn(layer.utterance_norm(x), ctx.utterances, false));
    x = ad::add(x, layer.ffn(layer.ffn_norm(x)));
  }
  const auto r_l = params.decoder_norm(x);
  const auto summary = ad::broadcast_rows(nn::linear_attention(ctx.entities, params.copy_attention), r_l.rows());
  const std::array<ad::Tensor, 2> parts{summary, r_l};
  const auto r_b = params.copy_ffn(ad::concat_cols(parts));
  return ad::add(ad::matmul_nt(r_l, params.vocab_embeddings), ad::matmul(r_b, params.copy_output));
}

std::vector<double> decode_step(std::span<const TokenId> prefix, const GenerationContext& ctx,
                                const GeneratorParams& params) {
  if (prefix.empty() || prefix.front() != kBos) throw ContractError("decode_step: prefix must start with BOS");
  ad::NoGradGuard guard;
  const auto logits = decoder_logits(prefix, ctx, params).value();
  return softmax_row(logits, logits.rows() - 1);
}

MaskedResponse mask_items(std::span<const std::string> tokens, const kg::EntityLinker& linker,
                          const kg::KnowledgeGraph& kg) {
  MaskedResponse out;
  std::size_t pos = 0;
  for (const auto& m : linker.mentions(tokens)) {
    if (!kg.is_item(m.entity)) continue;
    out.tokens.insert(out.tokens.end(), tokens.begin() + static_cast<long>(pos), tokens.begin() + static_cast<long>(m.begin));
    out.slots.push_back(out.tokens.size());
    out.items.push_back(m.entity);
    out.tokens.emplace_back(kItemToken);
    pos = m.end;
  }
  out.tokens.insert(out.tokens.end(), tokens.begin() + static_cast<long>(pos), tokens.end());
  return out;
}

std::string Generated::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Generated generate(const GenerationContext& ctx, const GeneratorParams& params, const Vocabulary& vocab,
                   const kg::KnowledgeGraph& kg, std::size_t max_len, DecodeMode mode) {
  if (max_len == 0) throw ConfigError("generate: max_len must be at least 1");
  if (mode.beam == 0) throw ConfigError("generate: beam width must be at least 1");
  if (static_cast<Eigen::Index>(max_len) > params.decoder_positions.rows()) {
    throw ConfigError("generate: max_len " + std::to_string(max_len) + " exceeds the decoder position table");
  }
  struct Hypothesis {
    std::vector<TokenId> ids;  // BOS-prefixed
    double score = 0.0;
  };
  // Higher score first; equal scores fall back to the lexicographically
  // smaller id sequence, so lower token ids win ties.
  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.ids < b.ids;
  };
  std::vector<Hypothesis> alive{{{kBos}, 0.0}};
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : alive) {
      const auto probs = decode_step(h.ids, ctx, params);
      for (std::size_t t = 0; t < probs.size(); ++t) {
        if (t == static_cast<std::size_t>(kPad) || t == static_cast<std::size_t>(kBos)) continue;
        Hypothesis next{h.ids, h.score + std::log(std::max(probs[t], kMinProbability))};
        next.ids.push_back(static_cast<TokenId>(t));
        candidates.push_back(std::move(next));
      }
    }
    const std::size_t keep = std::min(mode.beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep), candidates.end(), better);
    candidates.resize(keep);
    alive.clear();
    for (auto& c : candidates) {
      if (c.ids.back() == kEos) {
        finished.push_back(std::move(c));
      } else {
        alive.push_back(std::move(c));
      }
    }
    if (finished.size() >= mode.beam) break;
  }
  for (auto& h : alive) finished.push_back(std::move(h));
  const auto best = *std::min_element(finished.begin(), finished.end(), better);

  Generated out;
  for (std::size_t i = 1; i < best.ids.size(); ++i) {
    const auto id = best.ids[i];
    if (id == kEos) break;
    out.ids.push_back(id);
    if (id == kItem && ctx.slot_filler) {
      out.tokens.push_back(kg.surface(*ctx.slot_filler));
    } else {
      out.tokens.push_back(vocab.token(id));
    }
  }
  return out;
}

GenerationLoss generation_loss(std::span<const GenerationExample> batch, const GeneratorParams& params,
                               std::size_t max_response) {
  if (batch.empty()) throw EmptyInputError("generation_loss: empty batch");
  GenerationLoss out;
  std::vector<ad::Tensor> per_response;
  per_response.reserve(batch.size());
  const double floor = std::log(kMinProbability);
  for (const auto& ex : batch) {
    const std::size_t n = std::min(ex.response.size(), max_response);
    std::vector<TokenId> input{kBos};
    input.insert(input.end(), ex.response.begin(), ex.response.begin() + static_cast<long>(n));
    std::vector<long> target(ex.response.begin(), ex.response.begin() + static_cast<long>(n));
    target.push_back(kEos);
    for (auto& t : target) {
      if (t < 0 || t >= static_cast<long>(params.vocab_size())) t = kUnk;
    }
    const auto logp = ad::pick_per_row(ad::log_softmax_rows(decoder_logits(input, ex.context, params)), target);
    // Entries below the floor contribute the constant -log(1e-12) and no gradient.
    ad::Matrix keep = (logp.value().array() >= floor).cast<double>().matrix();
    ad::Matrix fill = ((1.0 - keep.array()) * (-floor)).matrix();
    const auto nll = ad::add(ad::scale(ad::hadamard(logp, ad::Tensor::constant(keep)), -1.0), ad::Tensor::constant(fill));
    const auto total = ad::sum(nll);
    out.token_nll += total.scalar();
    out.tokens += target.size();
    per_response.push_back(ad::scale(total, 1.0 / static_cast<double>(target.size())));
  }
  ad::Tensor sum = per_response.front();
  for (std::size_t i = 1; i < per_response.size(); ++i) sum = ad::add(sum, per_response[i]);
  out.total = ad::scale(sum, 1.0 / static_cast<double>(batch.size()));
  return out;
}

}  // namespace trea::generator
