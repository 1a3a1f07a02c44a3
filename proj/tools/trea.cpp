// trea: command-line front end.

#include "CLI11.hpp"
#include "json.hpp"

#include "trea/app/commands.hpp"
#include "trea/app/session.hpp"
#include "trea/error.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace trea;

struct Shared {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> sets;
  std::vector<std::string> ablate;
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config, "key = value config file");
  cmd->add_option("--seed", s.seed, "random seed (overrides the config)");
  cmd->add_option("--out", s.out, "output path");
  cmd->add_option("--set", s.sets, "override one config key (key=value); repeatable");
}

void add_ablate(CLI::App* cmd, Shared& s) {
  cmd->add_option("--ablate", s.ablate, "variant: iso, aln, ent, utt or eu; repeatable")
      ->check(CLI::IsMember({"iso", "aln", "ent", "utt", "eu"}));
}

// Overrides in the order they take effect: --set, then --seed, then --ablate.
std::vector<std::string> overrides(const Shared& s) {
  auto out = s.sets;
  if (s.seed) out.push_back("seed=" + std::to_string(*s.seed));
  train::TrainConfig probe;
  const auto before = probe.to_text();
  for (const auto& a : s.ablate) app::apply_ablation(probe, a);
  if (probe.lambda_iso == 0.0) out.push_back("lambda_iso=0");
  if (probe.lambda_align == 0.0) out.push_back("lambda_align=0");
  if (probe.drop_entities) out.push_back("drop_entities=true");
  if (probe.drop_utterances) out.push_back("drop_utterances=true");
  return out;
}

train::TrainConfig load(const Shared& s) {
  auto config = s.config.empty() ? train::TrainConfig{} : train::load_config(s.config);
  for (const auto& o : overrides(s)) config.apply_override(o);
  config.validate();
  return config;
}

std::filesystem::path model_dir(const std::string& flag, const Shared& s) {
  if (!flag.empty()) return flag;
  if (!s.config.empty()) {
    const auto config = load(s);
    if (!config.model_dir.empty()) return config.model_dir;
  }
  throw ConfigError("no model directory: pass --model or set model_dir in the config");
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
  } else {
    app::write_text(out, text);
  }
}

int fail(const char* kind, const std::string& message, int code) {
  nlohmann::json err{{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("trea"));
  spdlog::set_pattern("[%l] %v");

  CLI::App cli{"TREA conversational recommender"};
  cli.require_subcommand(1);
  bool verbose = false;
  cli.add_flag("-v,--verbose", verbose, "debug logging");

  Shared prep_s, rec_s, gen_s, eval_s, chat_s, tree_s, emb_s;
  std::string raw, data;
  std::string gen_model, eval_model, chat_model, emb_model;
  std::string split = "test";
  std::string transcript;
  std::optional<std::size_t> topk;
  std::string conversation;
  std::size_t turn = 0;

  auto* prep = cli.add_subcommand("prepare", "link, mask and index a raw JSON-lines dataset");
  add_shared(prep, prep_s);
  prep->add_option("--raw", raw, "raw conversations (default: config key raw)");

  auto* rec = cli.add_subcommand("train-rec", "train the reasoner; --out is the model directory");
  add_shared(rec, rec_s);
  add_ablate(rec, rec_s);
  rec->add_option("--data", data, "prepared dataset (default: config key prepared)");

  auto* gen = cli.add_subcommand("train-gen", "train the generator against a trained reasoner");
  add_shared(gen, gen_s);
  add_ablate(gen, gen_s);
  gen->add_option("--model", gen_model, "model directory written by train-rec");

  auto* eval = cli.add_subcommand("eval", "report metrics as JSON");
  add_shared(eval, eval_s);
  add_ablate(eval, eval_s);
  eval->add_option("--model", eval_model, "model directory");
  eval->add_option("--split", split, "train, valid or test")->check(CLI::IsMember({"train", "valid", "test"}));

  auto* chat = cli.add_subcommand("chat", "interactive session (:quit, :tree, :topk N)");
  add_shared(chat, chat_s);
  chat->add_option("--model", chat_model, "model directory");
  chat->add_option("--transcript", transcript, "read user lines from a file instead of stdin");
  chat->add_option("--topk", topk, "recommendations shown per turn");

  auto* tree = cli.add_subcommand("inspect-tree", "DOT on stdout, JSON to --out");
  add_shared(tree, tree_s);
  tree->add_option("--data", data, "prepared dataset (default: config key prepared)");
  tree->add_option("--conversation", conversation, "conversation id")->required();
  tree->add_option("--turn", turn, "number of turns replayed (0 = empty tree)");

  auto* emb = cli.add_subcommand("export-emb", "entity embeddings in word2vec text format");
  add_shared(emb, emb_s);
  emb->add_option("--model", emb_model, "model directory");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*prep) {
      auto config = load(prep_s);
      const std::filesystem::path in = raw.empty() ? config.raw : std::filesystem::path(raw);
      const std::filesystem::path out = prep_s.out.empty() ? config.prepared : std::filesystem::path(prep_s.out);
      if (in.empty() || out.empty()) throw ConfigError("prepare needs --raw and --out (or raw/prepared in the config)");
      const auto stats = app::run_prepare(config, in, out);
      nlohmann::json summary{{"conversations_in", stats.conversations_in},
                             {"conversations_out", stats.conversations_in - stats.dropped_conversations},
                             {"dropped_targets", stats.dropped_targets},
                             {"dropped_conversations", stats.dropped_conversations}};
      std::cout << summary.dump() << "\n";
    } else if (*rec) {
      auto config = load(rec_s);
      if (!data.empty()) config.prepared = data;
      const std::filesystem::path out = rec_s.out.empty() ? config.model_dir : std::filesystem::path(rec_s.out);
      if (out.empty()) throw ConfigError("train-rec needs --out (or model_dir in the config)");
      const auto outcome = app::run_train_rec(config, out);
      std::cout << outcome.metrics.dump() << "\n";
    } else if (*gen) {
      const auto dir = gen_model.empty() && !gen_s.out.empty() ? std::filesystem::path(gen_s.out) : model_dir(gen_model, gen_s);
      auto ov = overrides(gen_s);
      if (!gen_s.config.empty()) {
        spdlog::warn("train-gen reads the config stored in {}; --config is ignored", dir.string());
      }
      const auto result = app::run_train_gen(dir, ov);
      std::cout << nlohmann::json{{"epochs", result.curve.size()},
                                  {"best_epoch", result.best_epoch},
                                  {"stop_reason", result.stop_reason}}
                       .dump()
                << "\n";
    } else if (*eval) {
      const auto dir = model_dir(eval_model, eval_s);
      const auto report = app::run_eval(dir, overrides(eval_s), data::parse_split(split));
      emit(report.to_json().dump(2) + "\n", eval_s.out);
    } else if (*chat) {
      const auto dir = model_dir(chat_model, chat_s);
      const auto config = app::model_config(dir, overrides(chat_s));
      const auto res = app::load_resources(config);
      auto model = app::load_model(dir, res);
      model.config = config;
      app::SessionOptions opts;
      opts.top_k = topk.value_or(config.top_k);
      opts.max_len = config.max_response;
      opts.mode = generator::DecodeMode::beam_search(config.beam);
      opts.items_only = config.candidates == train::Candidates::items;
      opts.exclude_mentioned = config.exclude_mentioned;
      app::Session session(model, res, opts);
      std::ofstream out_file;
      if (!chat_s.out.empty()) {
        out_file.open(chat_s.out);
        if (!out_file) throw ValidationError("cannot write " + chat_s.out);
      }
      std::ostream& out = chat_s.out.empty() ? std::cout : out_file;
      if (!transcript.empty()) {
        std::ifstream in(transcript);
        if (!in) throw ValidationError("cannot read transcript " + transcript);
        return app::chat_repl(in, out, session, res.kg);
      }
      return app::chat_repl(std::cin, out, session, res.kg);
    } else if (*tree) {
      std::optional<app::Resources> res;
      std::filesystem::path prepared = data;
      if (!tree_s.config.empty()) {
        const auto config = load(tree_s);
        res = app::load_resources(config);
        if (prepared.empty()) prepared = config.prepared;
      }
      if (prepared.empty()) throw ConfigError("inspect-tree needs --data (or prepared in the config)");
      const auto view = app::run_inspect_tree(prepared, conversation, turn, res ? &res->kg : nullptr);
      std::cout << view.dot;
      if (!tree_s.out.empty()) app::write_text(tree_s.out, view.json.dump(2) + "\n");
    } else if (*emb) {
      const auto dir = model_dir(emb_model, emb_s);
      if (emb_s.out.empty()) throw ConfigError("export-emb needs --out");
      app::run_export_embeddings(dir, emb_s.out);
    }
  } catch (const trea::Error& e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}
