#pragma once

#include "trea/generator/generator.hpp"
#include "trea/kg/knowledge_graph.hpp"
#include "trea/kg/word_graph.hpp"
#include "trea/tree/reasoning_tree.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace trea::data {

inline constexpr const char* kPreparedFormat = "trea-prepared/1";

enum class Split { train, valid, test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

/// Item references in raw files are either numeric ids or alias strings.
using RawItem = std::variant<std::uint32_t, std::string>;

struct RawTurn {
  generator::Role role = generator::Role::user;
  std::string text;
  std::vector<RawItem> items;
};

struct RawConversation {
  std::string id;
  std::vector<RawTurn> turns;
  std::optional<Split> split;
};

/// JSON-lines, one `{id, turns:[{role, text, items}], split?}` per line.
/// A prepared file is rejected with a ValidationError.
std::vector<RawConversation> read_raw(const std::filesystem::path& path);
void write_raw(std::span<const RawConversation> conversations, const std::filesystem::path& path);

struct Turn {
  generator::Role role = generator::Role::user;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<kg::EntityId> entities;  // mention order
  std::vector<kg::WordId> words;
  int round = 0;                       // 1-based, strictly increasing
  std::optional<kg::EntityId> target;  // recommender turns only
  std::vector<std::string> response;   // recommender turns: tokens with items masked
  /// Tree growth caused by this turn: (entity, parent node) per mention.
  std::vector<std::pair<kg::EntityId, tree::NodeId>> nodes;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::optional<Split> split;
};

struct PrepareStats {
  std::size_t conversations_in = 0;
  std::size_t dropped_targets = 0;
  std::size_t dropped_conversations = 0;
};

struct PreparedDataset {
  std::vector<Conversation> conversations;
  PrepareStats stats;
};

/// Links every turn, masks item mentions in recommender turns, resolves the
/// target item (the first listed item) and precomputes tree growth. Targets
/// that do not resolve to an item entity are dropped, as are conversations
/// left without any target; both counts are logged.
PreparedDataset prepare(std::span<const RawConversation> raw, const kg::KnowledgeGraph& kg,
                        const kg::WordGraph& wg);

void write_prepared(const PreparedDataset& dataset, const std::filesystem::path& path);
/// Requires the format header; validates ids against the graphs when given.
PreparedDataset read_prepared(const std::filesystem::path& path, const kg::KnowledgeGraph* kg = nullptr,
                              const kg::WordGraph* wg = nullptr);

nlohmann::json to_json(const Conversation& c);
Conversation conversation_from_json(const nlohmann::json& doc);

/// Tree after replaying the stored growth of the first `turns` turns.
tree::ReasoningTree replay_tree(const Conversation& c, std::size_t turns);

/// Explicit split when the record carries one, else 8/1/1 by FNV-1a of the id.
Split split_of(const Conversation& c);
std::uint64_t fnv1a(std::string_view bytes);
/// Hex digest of the sorted training conversation ids.
std::string split_digest(std::span<const Conversation> conversations, Split which);

struct SplitView {
  std::vector<const Conversation*> train, valid, test;
  std::vector<const Conversation*>& operator[](Split s);
};
SplitView split(const PreparedDataset& dataset);

}  // namespace trea::data
