#pragma once

#include "trea/app/model.hpp"
#include "trea/data/dataset.hpp"
#include "trea/train/config.hpp"
#include "trea/train/metrics.hpp"
#include "trea/train/trainer.hpp"

#include "json.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace trea::app {

/// `--ablate` values: iso, aln (training-time loss terms), ent, utt, eu
/// (generator context sources).
void apply_ablation(train::TrainConfig& config, const std::string& ablation);

data::PrepareStats run_prepare(const train::TrainConfig& config, const std::filesystem::path& raw,
                               const std::filesystem::path& out);

struct RecTrainOutcome {
  train::TrainResult result;
  nlohmann::json metrics;
};

/// Trains the reasoner on the training split and writes reasoner.bin,
/// rec_loss.csv, rec_metrics.json, config.txt and model_meta.json.
RecTrainOutcome run_train_rec(const train::TrainConfig& config, const std::filesystem::path& model_dir);

/// Trains the generator against the frozen reasoner in `model_dir` and adds
/// generator.bin, vocab.txt and gen_loss.csv. `overrides` are applied on top
/// of the stored config.
train::TrainResult run_train_gen(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides);

/// Recall@k, per-round Recall@50, distinct-n, BLEU-n and perplexity on one
/// split. Throws ValidationError when the dataset's training split does not
/// match the one the model was trained on.
train::EvalReport run_eval(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides,
                           data::Split split = data::Split::test);

struct TreeView {
  std::string dot;
  nlohmann::json json;
  std::size_t mentions = 0;
};
/// Tree after the first `turns` turns of one prepared conversation.
TreeView run_inspect_tree(const std::filesystem::path& prepared, const std::string& conversation_id,
                          std::size_t turns, const kg::KnowledgeGraph* kg = nullptr);

/// Word2vec text format: header `count dim`, then `id v1 ... vd` per entity.
std::string embeddings_text(const ad::Matrix& table);
void run_export_embeddings(const std::filesystem::path& model_dir, const std::filesystem::path& out);

/// Config overrides taken from the model directory's stored snapshot.
train::TrainConfig model_config(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides);

}  // namespace trea::app
