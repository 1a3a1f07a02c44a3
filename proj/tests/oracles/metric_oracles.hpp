#pragma once

// Brute-force metric definitions, written without sharing code with the
// library versions.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace trea::oracle {

inline double recall(const std::vector<std::vector<unsigned>>& ranked, const std::vector<unsigned>& truth,
                     std::size_t k) {
  double hits = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    bool found = false;
    for (std::size_t p = 0; p < k && p < ranked[i].size(); ++p) found = found || ranked[i][p] == truth[i];
    hits += found ? 1 : 0;
  }
  return hits / static_cast<double>(ranked.size());
}

inline std::string gram(const std::vector<std::string>& s, std::size_t at, std::size_t n) {
  std::string g;
  for (std::size_t i = at; i < at + n; ++i) g += s[i] + '\x1f';
  return g;
}

inline double distinct(const std::vector<std::vector<std::string>>& corpus, std::size_t n) {
  std::map<std::string, int> seen;
  double total = 0;
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      seen[gram(s, i, n)]++;
      total += 1;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(seen.size()) / total;
}

inline double bleu(const std::vector<std::vector<std::string>>& hyps, const std::vector<std::vector<std::string>>& refs,
                   std::size_t n) {
  double c = 0, r = 0, log_p = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    c += static_cast<double>(hyps[i].size());
    r += static_cast<double>(refs[i].size());
  }
  for (std::size_t m = 1; m <= n; ++m) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      std::map<std::string, double> hc, rc;
      for (std::size_t p = 0; p + m <= hyps[i].size(); ++p) hc[gram(hyps[i], p, m)] += 1;
      for (std::size_t p = 0; p + m <= refs[i].size(); ++p) rc[gram(refs[i], p, m)] += 1;
      for (const auto& [g, cnt] : hc) {
        den += cnt;
        num += std::min(cnt, rc[g]);
      }
    }
    if (num == 0) return 0.0;
    log_p += std::log(num / den) / static_cast<double>(n);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_p);
}

}  // namespace trea::oracle
