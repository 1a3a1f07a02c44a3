#include "trea/train/trainer.hpp"

#include "trea/error.hpp"
#include "trea/nn/adam.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

namespace trea::train {

namespace {

struct BatchLoss {
  ad::Tensor mean;  // scalar being minimised
  double sample_sum = 0.0;
  std::size_t clamped = 0;
};

using BatchFn = std::function<BatchLoss(std::span<const std::size_t>)>;
using ValidFn = std::function<std::optional<double>()>;

// Seed stream for data order, kept apart from the parameter initialiser.
constexpr std::uint64_t kShuffleSalt = 0x5eed5a17ull;

TrainResult run(const nn::ParamSet& params, std::size_t sample_count, std::size_t batch_size,
                std::size_t max_epochs, const TrainConfig& config, const BatchFn& batch_loss,
                const ValidFn& valid_loss, const TrainOptions& options, const char* stage) {
  if (sample_count == 0) throw EmptyInputError(std::string(stage) + ": no training samples");
  nn::ParamSet ps = params;
  nn::Adam adam(ps, config.adam());
  std::mt19937_64 rng(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<ad::Matrix> best_values;
  std::size_t since_best = 0;
  result.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats st;
    st.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < sample_count; b += batch_size) {
      const std::span<const std::size_t> idx(order.data() + b, std::min(batch_size, sample_count - b));
      ps.zero_grad();
      auto loss = batch_loss(idx);
      const double value = loss.mean.scalar();
      if (!std::isfinite(value)) {
        throw DivergenceError(std::string(stage) + ": loss became " + std::to_string(value) + " at epoch " +
                              std::to_string(epoch) + ", step " + std::to_string(adam.steps() + 1));
      }
      ad::backward(loss.mean);
      const double norm = nn::clip_gradients(ps, config.clip_mode, config.grad_clip);
      if (!std::isfinite(norm)) {
        throw DivergenceError(std::string(stage) + ": gradient norm became " + std::to_string(norm) + " at epoch " +
                              std::to_string(epoch) + ", step " + std::to_string(adam.steps() + 1));
      }
      const double clipped = ps.grad_norm();
      adam.step();
      result.step_norms.push_back(clipped);
      st.max_grad_norm = std::max(st.max_grad_norm, norm);
      st.max_clipped_norm = std::max(st.max_clipped_norm, clipped);
      st.clamped += loss.clamped;
      loss_sum += loss.sample_sum;
      ++st.steps;
    }
    ps.zero_grad();
    st.train_loss = loss_sum / static_cast<double>(sample_count);
    st.valid_loss = valid_loss();
    result.curve.push_back(st);
    spdlog::debug("{} epoch {}: train {:.6f} valid {} max-norm {:.4g}", stage, epoch, st.train_loss,
                  st.valid_loss ? std::to_string(*st.valid_loss) : std::string("-"), st.max_grad_norm);

    const double monitored = st.valid_loss.value_or(st.train_loss);
    if (monitored < best) {
      best = monitored;
      result.best_epoch = epoch;
      since_best = 0;
      if (options.restore_best) best_values = ps.snapshot();
    } else if (++since_best >= config.convergence_patience) {
      result.stop_reason = "converged";
    }
    if (options.on_epoch && !options.on_epoch(st)) {
      result.stop_reason = "callback";
      break;
    }
    if (result.stop_reason == "converged") break;
  }
  if (options.restore_best && !best_values.empty()) ps.restore(best_values);
  return result;
}

std::vector<bool> sample_mask(const std::vector<bool>& base, const RecSample& s, bool exclude_mentioned) {
  if (!exclude_mentioned) return base;
  auto mask = base;
  reasoner::exclude_mentioned(mask, s.tree);
  return mask;
}

}  // namespace

TrainResult train_reasoner(reasoner::ReasonerModel& model, std::span<const RecSample> train,
                           std::span<const RecSample> valid, const TrainConfig& config,
                           const kg::KnowledgeGraph& kg, const TrainOptions& options) {
  config.validate();
  const auto base = candidate_mask(kg, config.candidates == Candidates::items);
  for (const auto& s : train) {
    if (!base[s.target.index]) {
      throw ValidationError("conversation " + s.conversation_id + ": target " + std::to_string(s.target.index) +
                            " is not a candidate");
    }
  }
  auto batch = [&](std::span<const std::size_t> idx) {
    const auto enc = model.encode();
    std::vector<reasoner::ReasoningTerm> terms;
    terms.reserve(idx.size());
    for (auto i : idx) {
      const auto& s = train[i];
      const auto out = reasoner::reason(s.input(), enc.entities, enc.words, model.head, model.config);
      auto mask = sample_mask(base, s, config.exclude_mentioned);
      mask[s.target.index] = true;  // a repeated target stays learnable
      terms.push_back(reasoner::make_term(out, s.target, std::move(mask)));
    }
    auto loss = reasoner::reasoning_loss(terms, model.config);
    BatchLoss bl;
    bl.sample_sum = loss.total.scalar();
    bl.mean = ad::scale(loss.total, 1.0 / static_cast<double>(idx.size()));
    bl.clamped = loss.clamped;
    return bl;
  };
  auto validate = [&]() -> std::optional<double> {
    if (valid.empty()) return std::nullopt;
    return reasoner_loss(model, valid, config, kg);
  };
  return run(model.params(), train.size(), config.batch_size, config.max_epochs, config, batch, validate, options,
             "train-rec");
}

double reasoner_loss(const reasoner::ReasonerModel& model, std::span<const RecSample> samples,
                     const TrainConfig& config, const kg::KnowledgeGraph& kg) {
  if (samples.empty()) throw EmptyInputError("reasoner_loss: no samples");
  ad::NoGradGuard guard;
  const auto base = candidate_mask(kg, config.candidates == Candidates::items);
  const auto enc = model.encode();
  double total = 0.0;
  for (const auto& s : samples) {
    const auto out = reasoner::reason(s.input(), enc.entities, enc.words, model.head, model.config);
    auto mask = sample_mask(base, s, config.exclude_mentioned);
    mask[s.target.index] = true;
    const std::array<reasoner::ReasoningTerm, 1> term{reasoner::make_term(out, s.target, std::move(mask))};
    total += reasoner::reasoning_loss(term, model.config).total.scalar();
  }
  return total / static_cast<double>(samples.size());
}

std::vector<Ranking> rank(const reasoner::ReasonerModel& model, std::span<const RecSample> samples,
                          const TrainConfig& config, const kg::KnowledgeGraph& kg) {
  ad::NoGradGuard guard;
  const auto base = candidate_mask(kg, config.candidates == Candidates::items);
  const auto enc = model.encode();
  std::vector<Ranking> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto mask = sample_mask(base, s, config.exclude_mentioned);
    const auto r = reasoner::reason(s.input(), enc.entities, enc.words, model.head, model.config);
    out.push_back(reasoner::distribution_from_logits(r.logits.value(), mask).ranked(mask));
  }
  return out;
}

std::optional<double> mean_branch_cosine(const reasoner::ReasonerModel& model, std::span<const RecSample> samples) {
  ad::NoGradGuard guard;
  const auto enc = model.encode();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& s : samples) {
    if (s.tree.branches().size() < 2) continue;
    const auto branches = reasoner::embed_branches(s.tree, enc.entities, model.head, model.config.branch_length);
    const auto pooled = reasoner::pool_branches(branches, model.head).value();
    for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) {
        const double denom = pooled.row(i).norm() * pooled.row(j).norm();
        sum += denom > 0 ? pooled.row(i).dot(pooled.row(j)) / denom : 0.0;
        ++pairs;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return sum / static_cast<double>(pairs);
}

ad::Tensor frozen_entities(const reasoner::ReasonerModel& model) {
  ad::NoGradGuard guard;
  return ad::Tensor::constant(model.encode().entities.value());
}

std::vector<generator::GenerationExample> generation_examples(std::span<const GenSample> samples,
                                                              const ad::Tensor& entity_table,
                                                              const generator::GeneratorParams& params,
                                                              const generator::GeneratorConfig& config) {
  std::vector<generator::GenerationExample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({generator::build_context(s.selection, entity_table, params, config, s.slot), s.response});
  }
  return out;
}

TrainResult train_generator(generator::GeneratorParams& params, const ad::Tensor& entity_table,
                            std::span<const GenSample> train, std::span<const GenSample> valid,
                            const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  if (entity_table.requires_grad()) throw ContractError("train_generator: the entity table must be frozen");
  const auto gc = config.generator_config();
  auto batch = [&](std::span<const std::size_t> idx) {
    std::vector<GenSample> picked;
    picked.reserve(idx.size());
    for (auto i : idx) picked.push_back(train[i]);
    const auto examples = generation_examples(picked, entity_table, params, gc);
    auto loss = generator::generation_loss(examples, params, config.max_response);
    BatchLoss bl;
    bl.mean = loss.total;
    bl.sample_sum = loss.total.scalar() * static_cast<double>(idx.size());
    return bl;
  };
  auto validate = [&]() -> std::optional<double> {
    if (valid.empty()) return std::nullopt;
    const auto tl = generator_token_loss(params, entity_table, valid, config);
    return tl.nll / static_cast<double>(tl.tokens);
  };
  return run(params.params(), train.size(), config.gen_batch_size, config.gen_max_epochs, config, batch, validate,
             options, "train-gen");
}

TokenLoss generator_token_loss(const generator::GeneratorParams& params, const ad::Tensor& entity_table,
                               std::span<const GenSample> samples, const TrainConfig& config) {
  ad::NoGradGuard guard;
  const auto gc = config.generator_config();
  TokenLoss out;
  for (const auto& s : samples) {
    const std::array<GenSample, 1> one{s};
    const auto examples = generation_examples(one, entity_table, params, gc);
    const auto loss = generator::generation_loss(examples, params, config.max_response);
    out.nll += loss.token_nll;
    out.tokens += loss.tokens;
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string loss_csv(const TrainResult& result) {
  std::string out = "epoch,train_loss,valid_loss,max_grad_norm,max_clipped_norm,steps,clamped\n";
  for (const auto& e : result.curve) {
    out += std::to_string(e.epoch) + ',' + num(e.train_loss) + ',' + (e.valid_loss ? num(*e.valid_loss) : "") + ',' +
           num(e.max_grad_norm) + ',' + num(e.max_clipped_norm) + ',' + std::to_string(e.steps) + ',' +
           std::to_string(e.clamped) + '\n';
  }
  return out;
}

}  // namespace trea::train
