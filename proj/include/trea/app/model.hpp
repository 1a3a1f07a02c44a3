#pragma once

#include "trea/data/dataset.hpp"
#include "trea/generator/generator.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"
#include "trea/reasoner/reasoner.hpp"
#include "trea/train/config.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>

namespace trea::app {

inline constexpr const char* kModelFormat = "trea-model/1";

struct Resources {
  kg::KnowledgeGraph kg;
  kg::WordGraph words;
};

/// Loads the graphs named by the config; ConfigError when a path is unset.
Resources load_resources(const train::TrainConfig& config);

/// Contents of a model directory.
struct Model {
  train::TrainConfig config;  // snapshot written by the last training stage
  nlohmann::json meta;
  reasoner::ReasonerModel reasoner;
  std::optional<generator::Vocabulary> vocab;
  std::optional<generator::GeneratorParams> generator;
};

namespace files {
inline constexpr const char* config = "config.txt";
inline constexpr const char* meta = "model_meta.json";
inline constexpr const char* reasoner = "reasoner.bin";
inline constexpr const char* rec_loss = "rec_loss.csv";
inline constexpr const char* rec_metrics = "rec_metrics.json";
inline constexpr const char* generator = "generator.bin";
inline constexpr const char* vocab = "vocab.txt";
inline constexpr const char* gen_loss = "gen_loss.csv";
}  // namespace files

/// Rebuilds the architecture from the stored config and loads the weights.
/// Throws ValidationError when the graphs do not match the stored sizes.
Model load_model(const std::filesystem::path& dir, const Resources& resources);

void save_reasoner(const std::filesystem::path& dir, const reasoner::ReasonerModel& model);
void save_generator(const std::filesystem::path& dir, const generator::GeneratorParams& params,
                    const generator::Vocabulary& vocab);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace trea::app
