#pragma once

#include "trea/nn/adam.hpp"
#include "trea/reasoner/reasoner.hpp"
#include "trea/generator/generator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trea::train {

enum class Candidates { items, all };

struct TrainConfig {
  // optimisation
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double grad_clip = 0.02;
  nn::ClipMode clip_mode = nn::ClipMode::global_norm;
  std::size_t max_epochs = 50;
  std::size_t convergence_patience = 3;
  std::uint64_t seed = 0;

  // reasoner
  double lambda_c = 0.9;
  double lambda_iso = 0.008;
  double lambda_align = 0.002;
  bool literal_alignment_sign = false;
  std::size_t branch_length = 10;
  std::size_t dim = 300;
  int rgcn_layers = 1;
  int gcn_layers = 1;
  /// Entity encoder nonlinearity; relu replaces the sigmoid.
  encoders::Activation rgcn_activation = encoders::Activation::sigmoid;
  Candidates candidates = Candidates::items;
  bool exclude_mentioned = false;

  // generator
  std::size_t gen_dim = 128;
  int gen_layers = 2;
  int gen_encoder_layers = 2;
  int gen_heads = 2;
  std::size_t gen_ffn_dim = 512;
  std::size_t max_context = 256;
  std::size_t max_response = 48;
  std::size_t gen_batch_size = 64;
  std::size_t gen_max_epochs = 30;
  std::size_t min_word_count = 1;
  bool drop_entities = false;
  bool drop_utterances = false;
  std::size_t beam = 1;

  // evaluation
  std::size_t top_k = 10;
  std::vector<std::size_t> recall_ks{1, 10, 50};
  std::vector<std::size_t> dist_ns{2, 3, 4};
  std::vector<std::size_t> bleu_ns{1, 2, 3, 4};
  std::vector<int> round_edges{4, 8, 12, 16};

  // files (relative paths in a config file resolve against its directory)
  std::filesystem::path kg_entities;
  std::filesystem::path kg_triples;
  std::filesystem::path kg_relations;
  std::filesystem::path word_vocab;
  std::filesystem::path word_edges;
  std::filesystem::path word_vectors;
  std::filesystem::path raw;
  std::filesystem::path prepared;
  std::filesystem::path model_dir;

  /// Assigns one field by key. Throws ConfigError for unknown keys or
  /// malformed values.
  void set(const std::string& key, const std::string& value, const std::filesystem::path& base = {});
  /// "key=value".
  void apply_override(const std::string& assignment);
  /// Throws ConfigError unless every size is positive and lambda_c is in [0, 1].
  void validate() const;

  /// Every key in a stable order, one `key = value` per line.
  std::string to_text() const;
  static std::vector<std::string> keys();

  reasoner::ReasonerConfig reasoner_config() const;
  generator::GeneratorConfig generator_config() const;
  nn::AdamOptions adam() const { return {learning_rate}; }
};

/// Reads `key = value` lines; '#' starts a comment.
TrainConfig load_config(const std::filesystem::path& path);
TrainConfig parse_config(const std::string& text, const std::filesystem::path& base = {},
                         const std::string& source = "<config>");

}  // namespace trea::train
