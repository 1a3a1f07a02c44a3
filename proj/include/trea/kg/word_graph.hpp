#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace trea::kg {

struct WordId {
  std::uint32_t index = 0;
  friend auto operator<=>(const WordId&, const WordId&) = default;
};

/// Undirected lexical concept graph over normalised word tokens.
class WordGraph {
 public:
  WordGraph() = default;
  /// Edges are stored once with the smaller id first; duplicates collapse.
  /// Self-edges and out-of-vocabulary endpoints are rejected.
  WordGraph(std::vector<std::string> vocab, const std::vector<std::pair<WordId, WordId>>& edges);

  std::size_t size() const { return vocab_.size(); }
  const std::string& token(WordId w) const;
  std::optional<WordId> find(std::string_view normalized_token) const;
  std::span<const std::string> vocab() const { return vocab_; }
  std::span<const std::pair<WordId, WordId>> edges() const { return edges_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, WordId> index_;
  std::vector<std::pair<WordId, WordId>> edges_;
};

/// Vocabulary file: one token per line. Edge file: `token<TAB>token`.
WordGraph load_word_graph(const std::filesystem::path& vocab_path, const std::filesystem::path& edges_path);

void write_word_graph(const WordGraph& wg, const std::filesystem::path& vocab_path,
                      const std::filesystem::path& edges_path);

}  // namespace trea::kg
