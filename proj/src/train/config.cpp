#include "trea/train/config.hpp"

#include "trea/error.hpp"
#include "trea/kg/tsv.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace trea::train {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + value + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  for (const auto& part : kg::split(value, ',')) {
    const auto item = trim(part);
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&, const std::filesystem::path&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
Field number(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
            c.*member = parse_number<T>(k, v);
          },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field flag(bool TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
            c.*member = parse_bool(k, v);
          },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

template <typename T>
Field list(std::vector<T> TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
            c.*member = parse_list<T>(k, v);
          },
          [member](const TrainConfig& c) { return format_list(c.*member); }};
}

Field path(std::filesystem::path TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string&, const std::string& v, const std::filesystem::path& base) {
            std::filesystem::path p(v);
            c.*member = (p.is_relative() && !base.empty() && !v.empty()) ? base / p : p;
          },
          [member](const TrainConfig& c) { return (c.*member).string(); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["batch_size"] = number(&TrainConfig::batch_size);
    t["learning_rate"] = number(&TrainConfig::learning_rate);
    t["grad_clip"] = number(&TrainConfig::grad_clip);
    t["clip_mode"] = {[](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
                        if (v == "global_norm") c.clip_mode = nn::ClipMode::global_norm;
                        else if (v == "value") c.clip_mode = nn::ClipMode::value;
                        else throw ConfigError("config key '" + k + "': expected global_norm or value");
                      },
                      [](const TrainConfig& c) {
                        return std::string(c.clip_mode == nn::ClipMode::global_norm ? "global_norm" : "value");
                      }};
    t["max_epochs"] = number(&TrainConfig::max_epochs);
    t["convergence_patience"] = number(&TrainConfig::convergence_patience);
    t["seed"] = number(&TrainConfig::seed);
    t["lambda_c"] = number(&TrainConfig::lambda_c);
    t["lambda_iso"] = number(&TrainConfig::lambda_iso);
    t["lambda_align"] = number(&TrainConfig::lambda_align);
    t["literal_alignment_sign"] = flag(&TrainConfig::literal_alignment_sign);
    t["branch_length"] = number(&TrainConfig::branch_length);
    t["dim"] = number(&TrainConfig::dim);
    t["rgcn_layers"] = number(&TrainConfig::rgcn_layers);
    t["gcn_layers"] = number(&TrainConfig::gcn_layers);
    t["rgcn_activation"] = {
        [](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
          if (v == "sigmoid") c.rgcn_activation = encoders::Activation::sigmoid;
          else if (v == "relu") c.rgcn_activation = encoders::Activation::relu;
          else throw ConfigError("config key '" + k + "': expected sigmoid or relu");
        },
        [](const TrainConfig& c) {
          return std::string(c.rgcn_activation == encoders::Activation::sigmoid ? "sigmoid" : "relu");
        }};
    t["candidates"] = {[](TrainConfig& c, const std::string& k, const std::string& v, const std::filesystem::path&) {
                         if (v == "items") c.candidates = Candidates::items;
                         else if (v == "all") c.candidates = Candidates::all;
                         else throw ConfigError("config key '" + k + "': expected items or all");
                       },
                       [](const TrainConfig& c) {
                         return std::string(c.candidates == Candidates::items ? "items" : "all");
                       }};
    t["exclude_mentioned"] = flag(&TrainConfig::exclude_mentioned);
    t["gen_dim"] = number(&TrainConfig::gen_dim);
    t["gen_layers"] = number(&TrainConfig::gen_layers);
    t["gen_encoder_layers"] = number(&TrainConfig::gen_encoder_layers);
    t["gen_heads"] = number(&TrainConfig::gen_heads);
    t["gen_ffn_dim"] = number(&TrainConfig::gen_ffn_dim);
    t["max_context"] = number(&TrainConfig::max_context);
    t["max_response"] = number(&TrainConfig::max_response);
    t["gen_batch_size"] = number(&TrainConfig::gen_batch_size);
    t["gen_max_epochs"] = number(&TrainConfig::gen_max_epochs);
    t["min_word_count"] = number(&TrainConfig::min_word_count);
    t["drop_entities"] = flag(&TrainConfig::drop_entities);
    t["drop_utterances"] = flag(&TrainConfig::drop_utterances);
    t["beam"] = number(&TrainConfig::beam);
    t["top_k"] = number(&TrainConfig::top_k);
    t["recall_ks"] = list(&TrainConfig::recall_ks);
    t["dist_ns"] = list(&TrainConfig::dist_ns);
    t["bleu_ns"] = list(&TrainConfig::bleu_ns);
    t["round_edges"] = list(&TrainConfig::round_edges);
    t["kg_entities"] = path(&TrainConfig::kg_entities);
    t["kg_triples"] = path(&TrainConfig::kg_triples);
    t["kg_relations"] = path(&TrainConfig::kg_relations);
    t["word_vocab"] = path(&TrainConfig::word_vocab);
    t["word_edges"] = path(&TrainConfig::word_edges);
    t["word_vectors"] = path(&TrainConfig::word_vectors);
    t["raw"] = path(&TrainConfig::raw);
    t["prepared"] = path(&TrainConfig::prepared);
    t["model_dir"] = path(&TrainConfig::model_dir);
    return t;
  }();
  return table;
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value, const std::filesystem::path& base) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value, base);
}

void TrainConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

void TrainConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  auto non_negative = [](const char* name, double v) {
    if (!(v >= 0)) throw ConfigError(std::string(name) + " must be non-negative");
  };
  positive("batch_size", static_cast<double>(batch_size));
  positive("learning_rate", learning_rate);
  positive("grad_clip", grad_clip);
  positive("max_epochs", static_cast<double>(max_epochs));
  positive("convergence_patience", static_cast<double>(convergence_patience));
  non_negative("lambda_iso", lambda_iso);
  non_negative("lambda_align", lambda_align);
  if (!(lambda_c >= 0.0 && lambda_c <= 1.0)) throw ConfigError("lambda_c must lie in [0, 1]");
  positive("branch_length", static_cast<double>(branch_length));
  positive("dim", static_cast<double>(dim));
  positive("rgcn_layers", rgcn_layers);
  positive("gcn_layers", gcn_layers);
  positive("gen_dim", static_cast<double>(gen_dim));
  positive("gen_layers", gen_layers);
  positive("gen_encoder_layers", gen_encoder_layers);
  positive("gen_heads", gen_heads);
  if (gen_dim % static_cast<std::size_t>(gen_heads) != 0) throw ConfigError("gen_dim must be divisible by gen_heads");
  positive("gen_ffn_dim", static_cast<double>(gen_ffn_dim));
  positive("max_context", static_cast<double>(max_context));
  positive("max_response", static_cast<double>(max_response));
  positive("gen_batch_size", static_cast<double>(gen_batch_size));
  positive("gen_max_epochs", static_cast<double>(gen_max_epochs));
  positive("min_word_count", static_cast<double>(min_word_count));
  positive("beam", static_cast<double>(beam));
  positive("top_k", static_cast<double>(top_k));
  for (auto k : recall_ks) positive("recall_ks entries", static_cast<double>(k));
  for (auto n : dist_ns) positive("dist_ns entries", static_cast<double>(n));
  for (auto n : bleu_ns) positive("bleu_ns entries", static_cast<double>(n));
  for (std::size_t i = 1; i < round_edges.size(); ++i) {
    if (round_edges[i] <= round_edges[i - 1]) throw ConfigError("round_edges must be strictly increasing");
  }
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : fields()) out.push_back(k);
  return out;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(*this) + "\n";
  return out;
}

reasoner::ReasonerConfig TrainConfig::reasoner_config() const {
  reasoner::ReasonerConfig rc;
  rc.dim = static_cast<Eigen::Index>(dim);
  rc.branch_length = branch_length;
  rc.rgcn_layers = rgcn_layers;
  rc.gcn_layers = gcn_layers;
  rc.rgcn_activation = rgcn_activation;
  rc.lambda_c = lambda_c;
  rc.lambda_iso = lambda_iso;
  rc.lambda_align = lambda_align;
  rc.literal_alignment_sign = literal_alignment_sign;
  rc.exclude_mentioned = exclude_mentioned;
  return rc;
}

generator::GeneratorConfig TrainConfig::generator_config() const {
  generator::GeneratorConfig gc;
  gc.dim = static_cast<Eigen::Index>(gen_dim);
  gc.layers = gen_layers;
  gc.heads = gen_heads;
  gc.ffn_dim = static_cast<Eigen::Index>(gen_ffn_dim);
  gc.encoder_layers = gen_encoder_layers;
  gc.entity_dim = static_cast<Eigen::Index>(dim);
  gc.max_context = max_context;
  gc.max_response = max_response;
  gc.drop_entities = drop_entities;
  gc.drop_utterances = drop_utterances;
  return gc;
}

TrainConfig parse_config(const std::string& text, const std::filesystem::path& base, const std::string& source) {
  TrainConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      c.set(trim(std::string_view(body).substr(0, eq)), trim(std::string_view(body).substr(eq + 1)), base);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path(), path.string());
}

}  // namespace trea::train
