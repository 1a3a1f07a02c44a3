#include "trea/app/model.hpp"

#include "trea/encoders/graph_encoders.hpp"
#include "trea/error.hpp"
#include "trea/nn/params.hpp"

#include <fstream>
#include <sstream>

namespace trea::app {

Resources load_resources(const train::TrainConfig& config) {
  auto need = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("config key '") + key + "' is not set");
    return p;
  };
  Resources r;
  std::optional<std::filesystem::path> relations;
  if (!config.kg_relations.empty()) relations = config.kg_relations;
  r.kg = kg::load_kg(need(config.kg_entities, "kg_entities"), need(config.kg_triples, "kg_triples"), relations);
  r.words = kg::load_word_graph(need(config.word_vocab, "word_vocab"), need(config.word_edges, "word_edges"));
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_reasoner(const std::filesystem::path& dir, const reasoner::ReasonerModel& model) {
  std::ofstream out(dir / files::reasoner, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + (dir / files::reasoner).string());
  model.params().save(out);
}

void save_generator(const std::filesystem::path& dir, const generator::GeneratorParams& params,
                    const generator::Vocabulary& vocab) {
  std::ofstream out(dir / files::generator, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + (dir / files::generator).string());
  params.params().save(out);
  vocab.save(dir / files::vocab);
}

Model load_model(const std::filesystem::path& dir, const Resources& resources) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("model directory " + dir.string() + " not found");
  Model m;
  m.config = train::parse_config(read_text(dir / files::config), {}, (dir / files::config).string());
  try {
    m.meta = nlohmann::json::parse(read_text(dir / files::meta));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError((dir / files::meta).string() + ": " + e.what());
  }
  if (m.meta.value("format", "") != kModelFormat) throw ValidationError(dir.string() + " is not a trea model directory");
  if (m.meta.value("entities", std::size_t{0}) != resources.kg.entity_count() ||
      m.meta.value("relations", std::size_t{0}) != resources.kg.relation_count() ||
      m.meta.value("words", std::size_t{0}) != resources.words.size()) {
    throw ValidationError("model in " + dir.string() + " was trained on graphs of a different size");
  }
  m.reasoner = reasoner::ReasonerModel::make(resources.kg, resources.words, m.config.reasoner_config(), m.config.seed);
  {
    std::ifstream in(dir / files::reasoner, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + (dir / files::reasoner).string());
    auto ps = m.reasoner.params();
    ps.load(in);
  }
  if (std::filesystem::exists(dir / files::generator)) {
    m.vocab = generator::Vocabulary::load(dir / files::vocab);
    nn::Initializer init(0);
    m.generator = generator::GeneratorParams::make(m.config.generator_config(), m.vocab->size(), init);
    std::ifstream in(dir / files::generator, std::ios::binary);
    auto ps = m.generator->params();
    ps.load(in);
  }
  return m;
}

}  // namespace trea::app
