#include "trea/data/dataset.hpp"

#include "trea/error.hpp"
#include "trea/kg/linker.hpp"
#include "trea/kg/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace trea::data {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "valid" || name == "validation" || name == "dev") return Split::valid;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + name + "'");
}

namespace {

generator::Role parse_role(const std::string& r) {
  if (r == "user" || r == "seeker") return generator::Role::user;
  if (r == "recommender" || r == "system") return generator::Role::recommender;
  throw ValidationError("unknown role '" + r + "'");
}

const char* role_name(generator::Role r) { return r == generator::Role::user ? "user" : "recommender"; }

bool is_prepared_header(const json& doc) {
  return doc.is_object() && doc.contains("format");
}

RawConversation raw_from_json(const json& doc) {
  RawConversation c;
  c.id = doc.at("id").is_string() ? doc.at("id").get<std::string>() : doc.at("id").dump();
  if (doc.contains("split")) c.split = parse_split(doc.at("split").get<std::string>());
  for (const auto& t : doc.at("turns")) {
    RawTurn turn;
    turn.role = parse_role(t.at("role").get<std::string>());
    turn.text = t.at("text").get<std::string>();
    if (t.contains("items")) {
      for (const auto& item : t.at("items")) {
        if (item.is_number_unsigned()) turn.items.emplace_back(item.get<std::uint32_t>());
        else if (item.is_string()) turn.items.emplace_back(item.get<std::string>());
        else throw ValidationError("item must be an id or an alias string");
      }
    }
    c.turns.push_back(std::move(turn));
  }
  return c;
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
    try {
      fn(doc, lineno);
    } catch (const json::exception& e) {
      throw ParseError(path.string(), lineno, e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::optional<kg::EntityId> resolve_item(const RawItem& item, const kg::KnowledgeGraph& kg) {
  std::optional<kg::EntityId> e;
  if (const auto* id = std::get_if<std::uint32_t>(&item)) {
    if (*id < kg.entity_count()) e = kg::EntityId{*id};
  } else {
    e = kg.find_alias(kg::normalize(std::get<std::string>(item)));
  }
  if (e && !kg.is_item(*e)) e.reset();
  return e;
}

}  // namespace

std::vector<RawConversation> read_raw(const std::filesystem::path& path) {
  std::vector<RawConversation> out;
  for_each_json_line(path, [&](const json& doc, std::size_t lineno) {
    if (lineno == 1 && is_prepared_header(doc)) {
      throw ValidationError(path.string() + " is already prepared (format " + doc.at("format").dump() +
                            "); pass the raw conversations instead");
    }
    out.push_back(raw_from_json(doc));
  });
  return out;
}

void write_raw(std::span<const RawConversation> conversations, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& c : conversations) {
    json doc{{"id", c.id}, {"turns", json::array()}};
    if (c.split) doc["split"] = split_name(*c.split);
    for (const auto& t : c.turns) {
      json items = json::array();
      for (const auto& item : t.items) {
        std::visit([&](const auto& v) { items.push_back(v); }, item);
      }
      doc["turns"].push_back({{"role", role_name(t.role)}, {"text", t.text}, {"items", items}});
    }
    out << doc.dump() << '\n';
  }
}

PreparedDataset prepare(std::span<const RawConversation> raw, const kg::KnowledgeGraph& kg,
                        const kg::WordGraph& wg) {
  const kg::EntityLinker linker(kg);
  PreparedDataset out;
  out.stats.conversations_in = raw.size();
  for (const auto& rc : raw) {
    Conversation c;
    c.id = rc.id;
    c.split = rc.split;
    tree::ReasoningTree tree;
    bool has_target = false;
    int round = 0;
    for (const auto& rt : rc.turns) {
      Turn t;
      t.role = rt.role;
      t.text = rt.text;
      t.round = ++round;
      t.tokens = kg::tokenize(rt.text);
      for (const auto& m : linker.mentions(t.tokens)) t.entities.push_back(m.entity);
      t.words = kg::link_words(t.tokens, wg);
      if (t.role == generator::Role::recommender) {
        t.response = generator::mask_items(t.tokens, linker, kg).tokens;
        if (!rt.items.empty()) {
          t.target = resolve_item(rt.items.front(), kg);
          if (!t.target) {
            ++out.stats.dropped_targets;
          } else {
            has_target = true;
            if (std::find(t.entities.begin(), t.entities.end(), *t.target) == t.entities.end()) {
              t.entities.push_back(*t.target);
            }
          }
        }
      }
      for (auto e : t.entities) {
        const auto id = tree.connect(e, kg, t.round);
        t.nodes.emplace_back(e, *tree.node(id).parent);
      }
      c.turns.push_back(std::move(t));
    }
    if (!has_target) {
      ++out.stats.dropped_conversations;
      continue;
    }
    out.conversations.push_back(std::move(c));
  }
  if (out.stats.dropped_targets || out.stats.dropped_conversations) {
    spdlog::info("prepare: dropped {} unlinkable target(s) and {} conversation(s) without targets",
                 out.stats.dropped_targets, out.stats.dropped_conversations);
  }
  return out;
}

json to_json(const Conversation& c) {
  json turns = json::array();
  for (const auto& t : c.turns) {
    json entities = json::array(), words = json::array(), nodes = json::array();
    for (auto e : t.entities) entities.push_back(e.index);
    for (auto w : t.words) words.push_back(w.index);
    for (const auto& [e, parent] : t.nodes) nodes.push_back(json::array({e.index, parent}));
    json turn{{"role", role_name(t.role)}, {"text", t.text},   {"tokens", t.tokens}, {"entities", entities},
              {"words", words},            {"round", t.round}, {"nodes", nodes}};
    if (t.role == generator::Role::recommender) {
      turn["target"] = t.target ? json(t.target->index) : json(nullptr);
      turn["response"] = t.response;
    }
    turns.push_back(std::move(turn));
  }
  json doc{{"id", c.id}, {"turns", turns}};
  if (c.split) doc["split"] = split_name(*c.split);
  return doc;
}

Conversation conversation_from_json(const json& doc) {
  Conversation c;
  c.id = doc.at("id").get<std::string>();
  if (doc.contains("split")) c.split = parse_split(doc.at("split").get<std::string>());
  for (const auto& jt : doc.at("turns")) {
    Turn t;
    t.role = parse_role(jt.at("role").get<std::string>());
    t.text = jt.at("text").get<std::string>();
    t.tokens = jt.at("tokens").get<std::vector<std::string>>();
    for (const auto& e : jt.at("entities")) t.entities.push_back(kg::EntityId{e.get<std::uint32_t>()});
    for (const auto& w : jt.at("words")) t.words.push_back(kg::WordId{w.get<std::uint32_t>()});
    t.round = jt.at("round").get<int>();
    for (const auto& n : jt.at("nodes")) {
      t.nodes.emplace_back(kg::EntityId{n.at(0).get<std::uint32_t>()}, n.at(1).get<tree::NodeId>());
    }
    if (jt.contains("target") && !jt.at("target").is_null()) t.target = kg::EntityId{jt.at("target").get<std::uint32_t>()};
    if (jt.contains("response")) t.response = jt.at("response").get<std::vector<std::string>>();
    c.turns.push_back(std::move(t));
  }
  return c;
}

void write_prepared(const PreparedDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  json header{{"format", kPreparedFormat},
              {"conversations", dataset.conversations.size()},
              {"conversations_in", dataset.stats.conversations_in},
              {"dropped_targets", dataset.stats.dropped_targets},
              {"dropped_conversations", dataset.stats.dropped_conversations}};
  out << header.dump() << '\n';
  for (const auto& c : dataset.conversations) out << to_json(c).dump() << '\n';
}

namespace {

void validate(const Conversation& c, const kg::KnowledgeGraph* kg, const kg::WordGraph* wg) {
  int last_round = 0;
  for (const auto& t : c.turns) {
    if (t.round <= last_round) throw ValidationError("conversation " + c.id + ": rounds must strictly increase");
    last_round = t.round;
    if (t.nodes.size() != t.entities.size()) {
      throw ValidationError("conversation " + c.id + ": node list does not match entity mentions");
    }
    if (kg) {
      for (auto e : t.entities) kg->check(e);
      if (t.target && !kg->is_item(*t.target)) {
        throw ValidationError("conversation " + c.id + ": target " + std::to_string(t.target->index) +
                              " is not an item");
      }
    }
    if (wg) {
      for (auto w : t.words) {
        if (w.index >= wg->size()) throw ValidationError("conversation " + c.id + ": word id out of range");
      }
    }
  }
  replay_tree(c, c.turns.size()).validate();
}

}  // namespace

PreparedDataset read_prepared(const std::filesystem::path& path, const kg::KnowledgeGraph* kg,
                              const kg::WordGraph* wg) {
  PreparedDataset out;
  bool header_seen = false;
  for_each_json_line(path, [&](const json& doc, std::size_t) {
    if (!header_seen) {
      if (!is_prepared_header(doc) || doc.at("format") != kPreparedFormat) {
        throw ValidationError("missing '" + std::string(kPreparedFormat) + "' header; run `trea prepare` first");
      }
      header_seen = true;
      out.stats.conversations_in = doc.value("conversations_in", std::size_t{0});
      out.stats.dropped_targets = doc.value("dropped_targets", std::size_t{0});
      out.stats.dropped_conversations = doc.value("dropped_conversations", std::size_t{0});
      return;
    }
    auto c = conversation_from_json(doc);
    try {
      validate(c, kg, wg);
    } catch (const ContractError& e) {
      throw ValidationError(e.what());
    }
    out.conversations.push_back(std::move(c));
  });
  if (!header_seen) throw EmptyInputError(path.string() + " is empty");
  return out;
}

tree::ReasoningTree replay_tree(const Conversation& c, std::size_t turns) {
  tree::ReasoningTree tree;
  const auto n = std::min(turns, c.turns.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& [e, parent] : c.turns[i].nodes) {
      if (parent >= tree.size()) {
        throw ValidationError("conversation " + c.id + ": node parent " + std::to_string(parent) + " not yet created");
      }
      tree.attach(e, parent, c.turns[i].round);
    }
  }
  return tree;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

Split split_of(const Conversation& c) {
  if (c.split) return *c.split;
  const auto bucket = fnv1a(c.id) % 10;
  if (bucket < 8) return Split::train;
  return bucket == 8 ? Split::valid : Split::test;
}

std::string split_digest(std::span<const Conversation> conversations, Split which) {
  std::vector<std::string> ids;
  for (const auto& c : conversations) {
    if (split_of(c) == which) ids.push_back(c.id);
  }
  std::sort(ids.begin(), ids.end());
  std::string joined;
  for (const auto& id : ids) joined += id + '\n';
  std::ostringstream hex;
  hex << std::hex << fnv1a(joined);
  return hex.str();
}

std::vector<const Conversation*>& SplitView::operator[](Split s) {
  switch (s) {
    case Split::train: return train;
    case Split::valid: return valid;
    case Split::test: return test;
  }
  return train;
}

SplitView split(const PreparedDataset& dataset) {
  SplitView v;
  for (const auto& c : dataset.conversations) v[split_of(c)].push_back(&c);
  return v;
}

}  // namespace trea::data
