#pragma once

#include "trea/generator/generator.hpp"
#include "trea/reasoner/reasoner.hpp"
#include "trea/train/config.hpp"
#include "trea/train/metrics.hpp"
#include "trea/train/samples.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace trea::train {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;  // mean objective per sample
  std::optional<double> valid_loss;
  double max_grad_norm = 0.0;     // before clipping
  double max_clipped_norm = 0.0;  // after clipping
  std::size_t steps = 0;
  std::size_t clamped = 0;
};

struct TrainOptions {
  /// Called after every epoch; returning false stops training.
  std::function<bool(const EpochStats&)> on_epoch;
  /// Reload the parameters of the epoch with the best validation loss.
  bool restore_best = true;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  std::vector<double> step_norms;  // post-clip global norm of every step
  std::size_t best_epoch = 0;
  std::string stop_reason;  // "converged", "max_epochs" or "callback"
};

/// Adam with clipping; stops after `convergence_patience` epochs without a
/// validation improvement (training loss when `valid` is empty).
/// Throws DivergenceError on a non-finite loss or gradient.
TrainResult train_reasoner(reasoner::ReasonerModel& model, std::span<const RecSample> train,
                           std::span<const RecSample> valid, const TrainConfig& config,
                           const kg::KnowledgeGraph& kg, const TrainOptions& options = {});

/// Mean reasoning objective per sample, without gradients.
double reasoner_loss(const reasoner::ReasonerModel& model, std::span<const RecSample> samples,
                     const TrainConfig& config, const kg::KnowledgeGraph& kg);

/// Candidates ranked for every sample, best first.
std::vector<Ranking> rank(const reasoner::ReasonerModel& model, std::span<const RecSample> samples,
                          const TrainConfig& config, const kg::KnowledgeGraph& kg);

/// Mean pairwise cosine between pooled branch vectors over samples with at
/// least two branches; nullopt if there are none.
std::optional<double> mean_branch_cosine(const reasoner::ReasonerModel& model, std::span<const RecSample> samples);

/// Entity table from a trained reasoner, detached from the tape.
ad::Tensor frozen_entities(const reasoner::ReasonerModel& model);

std::vector<generator::GenerationExample> generation_examples(std::span<const GenSample> samples,
                                                              const ad::Tensor& entity_table,
                                                              const generator::GeneratorParams& params,
                                                              const generator::GeneratorConfig& config);

/// Only generator parameters are updated; the entity table is a constant.
TrainResult train_generator(generator::GeneratorParams& params, const ad::Tensor& entity_table,
                            std::span<const GenSample> train, std::span<const GenSample> valid,
                            const TrainConfig& config, const TrainOptions& options = {});

struct TokenLoss {
  double nll = 0.0;
  std::size_t tokens = 0;
};
TokenLoss generator_token_loss(const generator::GeneratorParams& params, const ad::Tensor& entity_table,
                               std::span<const GenSample> samples, const TrainConfig& config);

std::string loss_csv(const TrainResult& result);

}  // namespace trea::train
