#include "doctest.h"

#include "oracles/decoder_oracle.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "trea/error.hpp"
#include "trea/generator/generator.hpp"
#include "trea/kg/text.hpp"

#include <cmath>
#include <numeric>
#include <set>

using namespace trea;
using namespace trea::generator;
using testing::make_kg;
using testing::random_matrix;

namespace {

kg::EntityId E(std::uint32_t i) { return kg::EntityId{i}; }

GeneratorConfig tiny(int layers = 1) {
  GeneratorConfig c;
  c.dim = 4;
  c.heads = 2;
  c.ffn_dim = 6;
  c.layers = layers;
  c.encoder_layers = layers;
  c.entity_dim = 3;
  c.max_context = 12;
  c.max_response = 6;
  return c;
}

struct TinyModel {
  GeneratorConfig config;
  GeneratorParams params;
  ad::Tensor entity_table;
  TinyModel(std::uint64_t seed, std::size_t vocab = 10, int layers = 1) : config(tiny(layers)) {
    nn::Initializer init(seed);
    params = GeneratorParams::make(config, vocab, init);
    std::mt19937_64 rng(seed + 1);
    entity_table = ad::Tensor::constant(random_matrix(5, 3, rng));
  }
  GenerationContext context(std::vector<TokenId> tokens, std::optional<kg::EntityId> slot = std::nullopt) const {
    ContextSelection sel{{E(0), E(3)}, std::move(tokens)};
    return build_context(sel, entity_table, params, config, slot);
  }
};

}  // namespace

TEST_CASE("vocabulary reserves the special ids and maps unknowns") {
  std::vector<std::vector<std::string>> corpus{{"b", "a", "b"}, {"c", "b", "__item__"}};
  const auto v = Vocabulary::build(corpus);
  CHECK(v.size() == 11);
  CHECK(v.token(kItem) == "__item__");
  CHECK(v.id("b") == 8);  // most frequent first
  CHECK(v.id("a") == 9);  // ties alphabetical
  CHECK(v.id("zzz") == kUnk);
  CHECK(v.id("__item__") == kItem);

  testing::TempDir dir;
  v.save(dir.path() / "vocab.txt");
  CHECK(Vocabulary::load(dir.path() / "vocab.txt") == v);
  auto bad = dir.write("bad.txt", "a\nb\n");
  CHECK_THROWS_AS(Vocabulary::load(bad), ValidationError);
}

TEST_CASE("extract_context selects branch entities and the utterances mentioning them") {
  tree::ReasoningTree t;
  t.attach(E(1), tree::kRoot);  // a
  t.attach(E(2), 1);
  t.attach(E(4), tree::kRoot);  // unrelated branch
  std::vector<Utterance> history{
      {Role::user, {10, 11}, {E(1)}},
      {Role::recommender, {12}, {E(4)}},
      {Role::user, {13}, {}},
  };
  const auto sel = extract_context(t, E(2), history, 100);
  CHECK(sel.entities == std::vector<kg::EntityId>{E(1), E(2)});
  CHECK(sel.tokens == std::vector<TokenId>{kUserRole, 10, 11});

  // New entity on two branches: union of both.
  tree::ReasoningTree t2;
  t2.attach(E(1), tree::kRoot);
  t2.attach(E(2), 1);
  t2.attach(E(3), 1);
  t2.attach(E(1), 3);
  const auto sel2 = extract_context(t2, E(1), {}, 100);
  CHECK(std::set<kg::EntityId>(sel2.entities.begin(), sel2.entities.end()) == std::set<kg::EntityId>{E(1), E(2), E(3)});
  CHECK(sel2.tokens.empty());

  // Only the most recent tokens survive the cap.
  const auto capped = extract_context(t, E(2), history, 2);
  CHECK(capped.tokens == std::vector<TokenId>{10, 11});
}

TEST_CASE("extract_context agrees with a filter oracle on random dialogs") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::uint32_t> ent(0, 6);
  std::uniform_int_distribution<int> count(0, 2), tok(8, 20);
  for (int trial = 0; trial < 50; ++trial) {
    tree::ReasoningTree t;
    std::vector<Utterance> history;
    for (int turn = 0; turn < 6; ++turn) {
      Utterance u{turn % 2 ? Role::recommender : Role::user, {tok(rng), tok(rng)}, {}};
      for (int k = count(rng); k > 0; --k) {
        const auto e = E(ent(rng));
        u.entities.push_back(e);
        std::uniform_int_distribution<tree::NodeId> parent(0, static_cast<tree::NodeId>(t.size() - 1));
        t.attach(e, parent(rng));
      }
      history.push_back(u);
    }
    if (t.empty()) continue;
    const auto target = *t.nodes().back().entity;
    std::set<kg::EntityId> want_entities;
    for (const auto& b : t.branches()) {
      if (std::find(b.entities.begin(), b.entities.end(), target) == b.entities.end()) continue;
      want_entities.insert(b.entities.begin(), b.entities.end());
    }
    std::vector<TokenId> want_tokens;
    for (const auto& u : history) {
      bool hit = false;
      for (auto e : u.entities) hit = hit || want_entities.count(e);
      if (!hit) continue;
      want_tokens.push_back(u.role == Role::user ? kUserRole : kRecRole);
      want_tokens.insert(want_tokens.end(), u.tokens.begin(), u.tokens.end());
    }
    const auto sel = extract_context(t, target, history, 1000);
    CHECK(std::set<kg::EntityId>(sel.entities.begin(), sel.entities.end()) == want_entities);
    CHECK(sel.entities.size() == want_entities.size());
    CHECK(sel.tokens == want_tokens);
  }
}

TEST_CASE("encode_utterances shape conventions and oracle agreement") {
  TinyModel m(1);
  CHECK(encode_utterances({}, m.params).rows() == 1);
  const std::vector<TokenId> four{8, 9, 5, 3};
  CHECK(encode_utterances(four, m.params).rows() == 5);
  const auto got = encode_utterances(four, m.params).value();
  const auto want = oracle::encoder(four, m.params);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-5);
  const std::vector<TokenId> oov{99}, unk{kUnk};
  CHECK(encode_utterances(oov, m.params).value() == encode_utterances(unk, m.params).value());
}

TEST_CASE("decoder matches the scalar oracle and yields distributions") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TinyModel m(seed, 9, 1);
    const auto ctx = m.context({8, 5, 6});
    const std::vector<TokenId> prefix{kBos, 8, 4};
    const auto got = decoder_logits(prefix, ctx, m.params).value();
    const auto want = oracle::decoder_logits(prefix, ctx.entities.value(), ctx.utterances.value(), m.params);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-5);
    const auto probs = decode_step(prefix, ctx, m.params);
    CHECK(std::abs(std::accumulate(probs.begin(), probs.end(), 0.0) - 1.0) < 1e-5);
  }
  TinyModel two(42, 10, 2);
  const auto ctx = two.context({8, 9});
  const std::vector<TokenId> prefix{kBos, 9};
  const auto got = decoder_logits(prefix, ctx, two.params).value();
  const auto want = oracle::decoder_logits(prefix, ctx.entities.value(), ctx.utterances.value(), two.params);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("zeroing the copy projection leaves the plain vocabulary logits") {
  TinyModel m(5);
  const auto ctx = m.context({8});
  const std::vector<TokenId> prefix{kBos, 9};
  ad::Tensor(m.params.copy_output).mutable_value().setZero();
  const auto probs = decode_step(prefix, ctx, m.params);
  const auto plain = oracle::decoder_logits(prefix, ctx.entities.value(), ctx.utterances.value(), m.params);
  std::vector<double> row(static_cast<std::size_t>(plain.cols()));
  for (Eigen::Index j = 0; j < plain.cols(); ++j) row[static_cast<std::size_t>(j)] = plain(1, j);
  const auto p = oracle::softmax(row);
  for (std::size_t j = 0; j < p.size(); ++j) CHECK(probs[j] == doctest::Approx(p[j]).epsilon(1e-9));
}

TEST_CASE("decoder is causal") {
  TinyModel m(6, 10, 2);
  const auto ctx = m.context({8, 9});
  std::vector<TokenId> prefix{kBos, 8, 9, 5};
  const auto before = decoder_logits(prefix, ctx, m.params).value();
  prefix[3] = 7;
  prefix[2] = 4;
  const auto after = decoder_logits(prefix, ctx, m.params).value();
  CHECK(before.row(0).isApprox(after.row(0), 1e-12));
  CHECK(before.row(1).isApprox(after.row(1), 1e-12));
}

TEST_CASE("decoder rejects an empty entity memory") {
  TinyModel m(7);
  GenerationContext ctx{ad::Tensor::zeros(0, 4), encode_utterances({}, m.params), std::nullopt};
  const std::vector<TokenId> prefix{kBos};
  CHECK_THROWS_AS(decode_step(prefix, ctx, m.params), ContractError);
  CHECK_THROWS_AS(build_context({}, m.entity_table, m.params, m.config), ContractError);
}

TEST_CASE("ablation flags substitute a single zero row") {
  TinyModel m(8);
  ContextSelection sel{{E(1)}, {8, 9}};
  auto cfg = m.config;
  cfg.drop_entities = true;
  auto ctx = build_context(sel, m.entity_table, m.params, cfg);
  CHECK(ctx.entities.rows() == 1);
  CHECK(ctx.entities.value().isZero());
  CHECK(ctx.utterances.rows() == 3);
  cfg.drop_entities = false;
  cfg.drop_utterances = true;
  ctx = build_context(sel, m.entity_table, m.params, cfg);
  CHECK(ctx.utterances.rows() == 1);
  CHECK(ctx.utterances.value().isZero());
}

TEST_CASE("mask_items replaces item mentions left to right") {
  std::vector<std::vector<std::string>> aliases(4);
  aliases[1] = {"titanic"};
  aliases[2] = {"la la land"};
  aliases[3] = {"tom hanks"};
  const auto g = make_kg(4, 1, {}, {false, true, true, false}, aliases);
  const kg::EntityLinker linker(g);
  const auto m1 = mask_items(kg::tokenize("watch Titanic tonight"), linker, g);
  CHECK(m1.tokens == std::vector<std::string>{"watch", "__item__", "tonight"});
  CHECK(m1.slots == std::vector<std::size_t>{1});
  const auto m2 = mask_items(kg::tokenize("tom hanks is great"), linker, g);
  CHECK(m2.tokens == kg::tokenize("tom hanks is great"));
  CHECK(m2.slots.empty());
  const auto m3 = mask_items(kg::tokenize("la la land or titanic"), linker, g);
  CHECK(m3.tokens == std::vector<std::string>{"__item__", "or", "__item__"});
  CHECK(m3.slots == std::vector<std::size_t>{0, 2});
  CHECK(m3.items == std::vector<kg::EntityId>{E(2), E(1)});
}

TEST_CASE("generation respects max_len, is deterministic, and fills slots") {
  const auto g = make_kg(5, 1, {}, {false, false, false, true, false}, {{}, {}, {}, {"movie_3"}, {}});
  std::vector<std::vector<std::string>> corpus{{"w8", "w9"}};
  const auto vocab = Vocabulary::build(corpus);
  TinyModel m(9, vocab.size());
  const auto ctx = m.context({8}, E(3));
  CHECK(generate(ctx, m.params, vocab, g, 1).ids.size() <= 1);
  const auto a = generate(ctx, m.params, vocab, g, 6);
  const auto b = generate(ctx, m.params, vocab, g, 6);
  CHECK(a.ids == b.ids);
  CHECK(a.ids.size() <= 6);
  CHECK_THROWS_AS(generate(ctx, m.params, vocab, g, 0), ConfigError);

  // Force __item__ everywhere: huge copy logit on the item column.
  TinyModel forced(10, vocab.size());
  auto& wv = ad::Tensor(forced.params.copy_output).mutable_value();
  wv.setZero();
  ad::Tensor(forced.params.vocab_embeddings).mutable_value().setZero();
  ad::Tensor(forced.params.decoder_norm.gain).mutable_value().setZero();
  auto& bias = ad::Tensor(forced.params.decoder_norm.bias).mutable_value();
  bias.setZero();
  bias(0, 0) = 1.0;
  ad::Tensor(forced.params.vocab_embeddings).mutable_value()(kItem, 0) = 50.0;
  const auto out = generate(forced.context({8}, E(3)), forced.params, vocab, g, 3);
  CHECK(out.tokens == std::vector<std::string>{"movie_3", "movie_3", "movie_3"});
  CHECK(out.ids == std::vector<TokenId>{kItem, kItem, kItem});
}

TEST_CASE("beam of width one equals greedy decoding") {
  const auto g = make_kg(5, 1, {});
  std::vector<std::vector<std::string>> corpus{{"x", "y"}};
  const auto vocab = Vocabulary::build(corpus);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TinyModel m(100 + seed, vocab.size(), 1);
    const auto ctx = m.context({8, 9});
    const auto greedy = generate(ctx, m.params, vocab, g, 5, DecodeMode::greedy());
    const auto beam1 = generate(ctx, m.params, vocab, g, 5, DecodeMode::beam_search(1));
    CHECK(greedy.ids == beam1.ids);
    const auto beam3 = generate(ctx, m.params, vocab, g, 5, DecodeMode::beam_search(3));
    CHECK(beam3.ids.size() <= 5);
  }
}

TEST_CASE("generation loss ground truths") {
  SUBCASE("uniform model costs ln|V| per token") {
    TinyModel m(11, 10);
    ad::Tensor(m.params.vocab_embeddings).mutable_value().setZero();
    ad::Tensor(m.params.copy_output).mutable_value().setZero();
    std::vector<GenerationExample> batch{{m.context({8}), {8, 9, 4}}};
    const auto loss = generation_loss(batch, m.params, 6);
    CHECK(std::abs(loss.total.scalar() - std::log(10.0)) < 1e-9);
    CHECK(loss.tokens == 4);
  }
  SUBCASE("peaked model costs nearly nothing") {
    TinyModel m(12, 10);
    ad::Tensor(m.params.copy_output).mutable_value().setZero();
    ad::Tensor(m.params.vocab_embeddings).mutable_value().setZero();
    ad::Tensor(m.params.decoder_norm.gain).mutable_value().setZero();
    auto& bias = ad::Tensor(m.params.decoder_norm.bias).mutable_value();
    bias.setZero();
    bias(0, 0) = 1.0;
    ad::Tensor(m.params.vocab_embeddings).mutable_value()(kEos, 0) = 60.0;
    std::vector<GenerationExample> batch{{m.context({8}), {}}};
    CHECK(generation_loss(batch, m.params, 6).total.scalar() < 1e-12);
  }
  SUBCASE("two responses average their per-token means") {
    TinyModel m(13, 10, 2);
    std::vector<GenerationExample> batch{{m.context({8}), {8, 9}}, {m.context({9, 5}), {4, 8, 8, 9}}};
    double want = 0.0;
    for (const auto& ex : batch) {
      std::vector<int> input{kBos};
      input.insert(input.end(), ex.response.begin(), ex.response.end());
      std::vector<int> target(ex.response.begin(), ex.response.end());
      target.push_back(kEos);
      const auto logits = oracle::decoder_logits(input, ex.context.entities.value(), ex.context.utterances.value(), m.params);
      double sum = 0.0;
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        std::vector<double> row;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) row.push_back(logits(i, j));
        sum -= std::log(oracle::softmax(row)[static_cast<std::size_t>(target[static_cast<std::size_t>(i)])]);
      }
      want += sum / static_cast<double>(target.size());
    }
    want /= 2.0;
    CHECK(std::abs(generation_loss(batch, m.params, 6).total.scalar() - want) < 1e-6);
  }
  SUBCASE("long responses are cut to max_response") {
    TinyModel m(14, 10);
    std::vector<GenerationExample> batch{{m.context({8}), {8, 8, 8, 8, 8, 8, 8, 8, 8, 8}}};
    CHECK(generation_loss(batch, m.params, 6).tokens == 7);
  }
}

TEST_CASE("generation loss gradients match finite differences for every parameter") {
  TinyModel m(15, 10, 1);
  const auto ps = m.params.params();
  auto loss = [&] {
    std::vector<GenerationExample> batch{{m.context({8, 9}), {9, 4}}, {m.context({5}), {8}}};
    return generation_loss(batch, m.params, 6).total;
  };
  const auto res = testing::grad_check(ps, loss);
  INFO(res.worst);
  CHECK(res.checked == ps.scalar_count());
  CHECK(res.max_rel_error < 1e-4);
}
