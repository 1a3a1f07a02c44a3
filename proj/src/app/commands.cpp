#include "trea/app/commands.hpp"

#include "trea/encoders/graph_encoders.hpp"
#include "trea/error.hpp"
#include "trea/train/samples.hpp"

#include <spdlog/spdlog.h>

#include <charconv>

namespace trea::app {

using nlohmann::json;

void apply_ablation(train::TrainConfig& config, const std::string& ablation) {
  if (ablation == "iso") config.lambda_iso = 0.0;
  else if (ablation == "aln") config.lambda_align = 0.0;
  else if (ablation == "ent") config.drop_entities = true;
  else if (ablation == "utt") config.drop_utterances = true;
  else if (ablation == "eu") config.drop_entities = config.drop_utterances = true;
  else throw ConfigError("unknown ablation '" + ablation + "' (expected iso, aln, ent, utt or eu)");
}

data::PrepareStats run_prepare(const train::TrainConfig& config, const std::filesystem::path& raw,
                               const std::filesystem::path& out) {
  const auto res = load_resources(config);
  const auto conversations = data::read_raw(raw);
  const auto prepared = data::prepare(conversations, res.kg, res.words);
  data::write_prepared(prepared, out);
  return prepared.stats;
}

namespace {

data::PreparedDataset load_prepared(const train::TrainConfig& config, const Resources& res) {
  if (config.prepared.empty()) throw ConfigError("config key 'prepared' is not set");
  return data::read_prepared(config.prepared, &res.kg, &res.words);
}

std::vector<kg::EntityId> targets(std::span<const train::RecSample> samples) {
  std::vector<kg::EntityId> out;
  for (const auto& s : samples) out.push_back(s.target);
  return out;
}

json recall_table(const reasoner::ReasonerModel& model, std::span<const train::RecSample> samples,
                  const train::TrainConfig& config, const kg::KnowledgeGraph& kg) {
  json out = json::object();
  if (samples.empty()) return out;
  const auto ranked = train::rank(model, samples, config, kg);
  const auto truth = targets(samples);
  for (auto k : config.recall_ks) out[std::to_string(k)] = train::recall_at_k(ranked, truth, k);
  return out;
}

json base_meta(const train::TrainConfig& config, const Resources& res, const data::PreparedDataset& ds) {
  return {{"format", kModelFormat},
          {"seed", config.seed},
          {"train_digest", data::split_digest(ds.conversations, data::Split::train)},
          {"entities", res.kg.entity_count()},
          {"relations", res.kg.relation_count()},
          {"words", res.words.size()},
          {"generator", false}};
}

}  // namespace

RecTrainOutcome run_train_rec(const train::TrainConfig& config, const std::filesystem::path& model_dir) {
  config.validate();
  const auto res = load_resources(config);
  const auto ds = load_prepared(config, res);
  const auto parts = data::split(ds);
  const auto train_samples = train::rec_samples(parts.train);
  const auto valid_samples = train::rec_samples(parts.valid);
  if (train_samples.empty()) throw EmptyInputError("train-rec: the training split has no recommendation targets");

  auto model = reasoner::ReasonerModel::make(res.kg, res.words, config.reasoner_config(), config.seed);
  if (!config.word_vectors.empty()) {
    const auto filled = encoders::load_pretrained_word_vectors(config.word_vectors, res.words, model.gcn);
    spdlog::info("train-rec: {} of {} word vectors initialised from {}", filled, res.words.size(),
                 config.word_vectors.string());
  }
  RecTrainOutcome out;
  out.result = train::train_reasoner(model, train_samples, valid_samples, config, res.kg);

  double max_clipped = 0.0;
  for (double n : out.result.step_norms) max_clipped = std::max(max_clipped, n);
  out.metrics = {{"train", {{"samples", train_samples.size()}, {"recall", recall_table(model, train_samples, config, res.kg)}}},
                 {"valid", {{"samples", valid_samples.size()}, {"recall", recall_table(model, valid_samples, config, res.kg)}}},
                 {"epochs", out.result.curve.size()},
                 {"best_epoch", out.result.best_epoch},
                 {"stop_reason", out.result.stop_reason},
                 {"steps", out.result.step_norms.size()},
                 {"max_clipped_norm", max_clipped}};

  std::filesystem::create_directories(model_dir);
  save_reasoner(model_dir, model);
  write_text(model_dir / files::rec_loss, train::loss_csv(out.result));
  write_text(model_dir / files::rec_metrics, out.metrics.dump(2) + "\n");
  write_text(model_dir / files::config, config.to_text());
  write_text(model_dir / files::meta, base_meta(config, res, ds).dump(2) + "\n");
  return out;
}

train::TrainConfig model_config(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides) {
  auto config = train::parse_config(read_text(model_dir / files::config), {}, (model_dir / files::config).string());
  for (const auto& o : overrides) config.apply_override(o);
  config.validate();
  return config;
}

train::TrainResult run_train_gen(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides) {
  const auto stored = model_config(model_dir, {});
  const auto config = model_config(model_dir, overrides);
  if (config.to_text() != stored.to_text()) {
    const auto r0 = stored.reasoner_config(), r1 = config.reasoner_config();
    if (r0.dim != r1.dim || r0.branch_length != r1.branch_length || r0.rgcn_layers != r1.rgcn_layers ||
        r0.gcn_layers != r1.gcn_layers || r0.rgcn_activation != r1.rgcn_activation) {
      throw ConfigError("train-gen: reasoner architecture keys cannot change after train-rec");
    }
  }
  const auto res = load_resources(config);
  auto model = load_model(model_dir, res);
  const auto ds = load_prepared(config, res);
  if (model.meta.value("train_digest", "") != data::split_digest(ds.conversations, data::Split::train)) {
    throw ValidationError("train-gen: the dataset's training split differs from the one the reasoner saw");
  }
  const auto parts = data::split(ds);

  const auto corpus = train::vocabulary_corpus(parts.train);
  const auto vocab = generator::Vocabulary::build(corpus, config.min_word_count);
  const auto train_samples = train::gen_samples(parts.train, res.kg, vocab, config.max_context);
  const auto valid_samples = train::gen_samples(parts.valid, res.kg, vocab, config.max_context);

  const auto before = model.reasoner.params().snapshot();
  const auto entities = train::frozen_entities(model.reasoner);
  nn::Initializer init(config.seed ^ 0x9e3779b97f4a7c15ull);
  auto params = generator::GeneratorParams::make(config.generator_config(), vocab.size(), init);
  auto result = train::train_generator(params, entities, train_samples, valid_samples, config);
  const auto after = model.reasoner.params().snapshot();
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] != after[i]) throw ContractError("train-gen: reasoner parameters changed during generator training");
  }

  save_generator(model_dir, params, vocab);
  write_text(model_dir / files::gen_loss, train::loss_csv(result));
  write_text(model_dir / files::config, config.to_text());
  auto meta = model.meta;
  meta["generator"] = true;
  meta["vocab"] = vocab.size();
  write_text(model_dir / files::meta, meta.dump(2) + "\n");
  return result;
}

train::EvalReport run_eval(const std::filesystem::path& model_dir, const std::vector<std::string>& overrides,
                           data::Split split) {
  const auto stored = model_config(model_dir, {});
  const auto config = model_config(model_dir, overrides);
  if (config.lambda_iso != stored.lambda_iso || config.lambda_align != stored.lambda_align) {
    throw ConfigError("eval: the iso/aln ablations change training, not inference; train a model with "
                      "`trea train-rec --ablate iso|aln` and evaluate that");
  }
  const auto res = load_resources(config);
  auto model = load_model(model_dir, res);
  model.config = config;
  const auto ds = load_prepared(config, res);
  if (model.meta.value("train_digest", "") != data::split_digest(ds.conversations, data::Split::train)) {
    throw ValidationError("eval: the dataset's training split differs from the one the model was trained on");
  }
  auto parts = data::split(ds);
  const auto& convs = parts[split];
  const auto samples = train::rec_samples(convs);
  if (samples.empty()) throw EmptyInputError(std::string("eval: the ") + data::split_name(split) + " split has no targets");

  train::EvalReport report;
  report.rec_samples = samples.size();
  const auto ranked = train::rank(model.reasoner, samples, config, res.kg);
  const auto truth = targets(samples);
  for (auto k : config.recall_ks) report.recall[k] = train::recall_at_k(ranked, truth, k);
  std::vector<int> rounds;
  for (const auto& s : samples) rounds.push_back(s.round);
  report.per_round = train::eval_by_rounds(rounds, ranked, truth, config.round_edges, 50);

  if (model.generator) {
    const auto& vocab = *model.vocab;
    const auto& params = *model.generator;
    const auto entities = train::frozen_entities(model.reasoner);
    const auto gen = train::gen_samples(convs, res.kg, vocab, config.max_context);
    const auto tl = train::generator_token_loss(params, entities, gen, config);
    if (tl.tokens) report.ppl = train::perplexity(tl.nll, tl.tokens);

    // Free-running generation from the predicted entity.
    ad::NoGradGuard guard;
    const auto gc = config.generator_config();
    std::vector<train::Sentence> hyps, refs;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      const auto* conv = *std::find_if(convs.begin(), convs.end(),
                                       [&](const data::Conversation* c) { return c->id == s.conversation_id; });
      const auto predicted = ranked[i].front();
      auto tree = s.tree;
      tree.connect(predicted, res.kg, s.round);
      const auto selection =
          generator::extract_context(tree, predicted, train::history(*conv, s.turn, vocab), config.max_context);
      const auto ctx = generator::build_context(selection, entities, params, gc, predicted);
      const auto out = generator::generate(ctx, params, vocab, res.kg, config.max_response,
                                           generator::DecodeMode::beam_search(config.beam));
      train::Sentence hyp;
      for (auto id : out.ids) hyp.push_back(vocab.token(id));
      hyps.push_back(std::move(hyp));
      refs.push_back(conv->turns[s.turn].response);
    }
    report.gen_samples = hyps.size();
    for (auto n : config.dist_ns) report.dist[n] = train::distinct_n(hyps, n);
    for (auto n : config.bleu_ns) report.bleu[n] = train::bleu_n(hyps, refs, n);
  }
  return report;
}

TreeView run_inspect_tree(const std::filesystem::path& prepared, const std::string& conversation_id,
                          std::size_t turns, const kg::KnowledgeGraph* kg) {
  const auto ds = data::read_prepared(prepared, kg);
  const auto it = std::find_if(ds.conversations.begin(), ds.conversations.end(),
                               [&](const data::Conversation& c) { return c.id == conversation_id; });
  if (it == ds.conversations.end()) throw ValidationError("conversation '" + conversation_id + "' not found");
  if (turns > it->turns.size()) {
    throw ValidationError("conversation '" + conversation_id + "' has only " + std::to_string(it->turns.size()) +
                          " turns");
  }
  const auto tree = data::replay_tree(*it, turns);
  return {tree.to_dot(kg), tree.to_json(), tree.mention_count()};
}

std::string embeddings_text(const ad::Matrix& table) {
  std::string out = std::to_string(table.rows()) + " " + std::to_string(table.cols()) + "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, table(i, j));
      out += ' ';
      out.append(buf, ptr);
    }
    out += '\n';
  }
  return out;
}

void run_export_embeddings(const std::filesystem::path& model_dir, const std::filesystem::path& out) {
  const auto config = model_config(model_dir, {});
  const auto res = load_resources(config);
  const auto model = load_model(model_dir, res);
  write_text(out, embeddings_text(train::frozen_entities(model.reasoner).value()));
}

}  // namespace trea::app
