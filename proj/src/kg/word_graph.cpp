#include "trea/kg/word_graph.hpp"

#include "trea/error.hpp"
#include "trea/kg/text.hpp"
#include "trea/kg/tsv.hpp"

#include <algorithm>
#include <fstream>

namespace trea::kg {

WordGraph::WordGraph(std::vector<std::string> vocab, const std::vector<std::pair<WordId, WordId>>& edges) {
  for (auto& raw : vocab) {
    std::string token = normalize(raw);
    if (token.empty() || token.find(' ') != std::string::npos) {
      throw ValidationError("word vocabulary entry '" + raw + "' is not a single token");
    }
    const WordId id{static_cast<std::uint32_t>(vocab_.size())};
    if (!index_.emplace(token, id).second) throw ValidationError("duplicate word '" + token + "'");
    vocab_.push_back(std::move(token));
  }
  for (auto [a, b] : edges) {
    if (a.index >= vocab_.size() || b.index >= vocab_.size()) {
      throw ValidationError("word edge endpoint outside the vocabulary");
    }
    if (a == b) throw ValidationError("self-edge on word '" + vocab_[a.index] + "'");
    if (b < a) std::swap(a, b);
    edges_.emplace_back(a, b);
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

const std::string& WordGraph::token(WordId w) const {
  if (w.index >= vocab_.size()) throw ValidationError("word id " + std::to_string(w.index) + " out of range");
  return vocab_[w.index];
}

std::optional<WordId> WordGraph::find(std::string_view normalized_token) const {
  auto it = index_.find(std::string(normalized_token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

WordGraph load_word_graph(const std::filesystem::path& vocab_path, const std::filesystem::path& edges_path) {
  std::vector<std::string> vocab;
  for_each_tsv_row(vocab_path, [&](const TsvRow& row) {
    if (row.fields.size() != 1) throw ParseError(vocab_path.string(), row.line, "expected one token per line");
    vocab.push_back(row.fields[0]);
  });
  std::unordered_map<std::string, WordId> index;
  for (std::size_t i = 0; i < vocab.size(); ++i) index.emplace(normalize(vocab[i]), WordId{static_cast<std::uint32_t>(i)});

  std::vector<std::pair<WordId, WordId>> edges;
  for_each_tsv_row(edges_path, [&](const TsvRow& row) {
    if (row.fields.size() != 2) throw ParseError(edges_path.string(), row.line, "expected token<TAB>token");
    auto a = index.find(normalize(row.fields[0]));
    auto b = index.find(normalize(row.fields[1]));
    if (a == index.end() || b == index.end()) {
      throw ValidationError(edges_path.string() + ":" + std::to_string(row.line) + ": edge endpoint not in vocabulary");
    }
    edges.emplace_back(a->second, b->second);
  });
  return WordGraph(std::move(vocab), edges);
}

void write_word_graph(const WordGraph& wg, const std::filesystem::path& vocab_path,
                      const std::filesystem::path& edges_path) {
  std::ofstream v(vocab_path, std::ios::binary);
  for (const auto& t : wg.vocab()) v << t << '\n';
  std::ofstream e(edges_path, std::ios::binary);
  for (const auto& [a, b] : wg.edges()) e << wg.token(a) << '\t' << wg.token(b) << '\n';
  if (!v || !e) throw ValidationError("failed to write word graph files");
}

}  // namespace trea::kg
