#pragma once

// Line-by-line transcription of the connection strategy: walk the mentioned
// entities in reverse order of mention, attach the new entity under the
// first one adjacent to it in the KG, otherwise under the root.

#include "graph_oracles.hpp"

#include <cstdint>
#include <vector>

namespace trea::oracle {

struct LiteralTree {
  // Index 0 is the root; entity[0] is unused.
  std::vector<long> parent{-1};
  std::vector<std::uint32_t> entity{0};

  void connect(std::uint32_t e_star, const std::vector<RawTriple>& triples) {
    std::vector<long> es;  // node ids, reverse order of mention
    for (long i = static_cast<long>(parent.size()) - 1; i >= 1; --i) es.push_back(i);
    for (long node : es) {
      if (adjacent(triples, entity[static_cast<std::size_t>(node)], e_star)) {
        add_edge(node, e_star);
        return;
      }
    }
    add_edge(0, e_star);
  }

 private:
  void add_edge(long from, std::uint32_t e) {
    parent.push_back(from);
    entity.push_back(e);
  }
};

}  // namespace trea::oracle
