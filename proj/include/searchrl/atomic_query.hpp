#pragma once

// Ratcliff-Obershelp matching blocks, the similarity ratio built on them, and
// greedy atomic query counting (length window + diversity threshold).
//
// All lengths are in Unicode code points. Queries are compared after
// collapsing whitespace; no other normalization is applied.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "text_metrics.hpp"

namespace searchrl {

// Decodes UTF-8. Bytes that do not start a valid sequence map to
// U+DC80..U+DCFF so distinct malformed bytes stay distinct.
inline std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
    for (int k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (ok) {
      out.push_back(cp);
      i += static_cast<std::size_t>(len);
    } else {
      out.push_back(0xDC00 + b0);
      ++i;
    }
  }
  return out;
}

inline std::size_t char_length(std::string_view s) { return utf8_decode(s).size(); }

struct MatchBlock {
  std::size_t start_a = 0;
  std::size_t start_b = 0;
  std::size_t length = 0;
  bool operator==(const MatchBlock&) const = default;
};

namespace detail {

// Longest common substring of a[alo,ahi) and b[blo,bhi); ties go to the
// smallest start in a, then the smallest start in b.
inline MatchBlock longest_match(const std::u32string& a, const std::u32string& b, std::size_t alo, std::size_t ahi,
                                std::size_t blo, std::size_t bhi) {
  MatchBlock best{alo, blo, 0};
  const std::size_t w = bhi - blo;
  std::vector<std::size_t> prev(w + 1, 0), cur(w + 1, 0);
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      const std::size_t k = j - blo + 1;
      cur[k] = a[i] == b[j] ? prev[k - 1] + 1 : 0;
      if (cur[k] > best.length) best = {i + 1 - cur[k], j + 1 - cur[k], cur[k]};
    }
    std::swap(prev, cur);
  }
  return best;
}

}  // namespace detail

inline std::vector<MatchBlock> matching_blocks(const std::u32string& a, const std::u32string& b) {
  std::vector<MatchBlock> blocks;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> todo{{0, a.size(), 0, b.size()}};
  while (!todo.empty()) {
    const auto [alo, ahi, blo, bhi] = todo.back();
    todo.pop_back();
    if (alo >= ahi || blo >= bhi) continue;
    const auto m = detail::longest_match(a, b, alo, ahi, blo, bhi);
    if (m.length == 0) continue;
    blocks.push_back(m);
    todo.emplace_back(alo, m.start_a, blo, m.start_b);
    todo.emplace_back(m.start_a + m.length, ahi, m.start_b + m.length, bhi);
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const MatchBlock& x, const MatchBlock& y) { return x.start_a < y.start_a; });
  return blocks;
}

inline std::vector<MatchBlock> matching_blocks(std::string_view a, std::string_view b) {
  return matching_blocks(utf8_decode(a), utf8_decode(b));
}

inline double similarity_ratio(const std::u32string& a, const std::u32string& b) {
  const std::size_t total = a.size() + b.size();
  if (total == 0) return 1.0;  // two empty strings are identical
  std::size_t matched = 0;
  for (const auto& m : matching_blocks(a, b)) matched += m.length;
  return 2.0 * static_cast<double>(matched) / static_cast<double>(total);
}

// Not symmetric in general: the recursion depends on which side is `a`.
inline double similarity_ratio(std::string_view a, std::string_view b) {
  return similarity_ratio(utf8_decode(a), utf8_decode(b));
}

struct AtomicQueryConfig {
  std::size_t l_min = 10;
  std::size_t l_max = 120;
  double threshold = 0.3;

  void validate() const {
    if (l_min < 1 || l_max < 1) throw std::invalid_argument("AtomicQueryConfig: length bounds must be positive");
    if (l_min > l_max) throw std::invalid_argument("AtomicQueryConfig: l_min > l_max");
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw std::invalid_argument("AtomicQueryConfig: threshold must lie in [0,1]");
  }
};

// Greedy admission: a query inside the length window joins the valid set when
// its ratio against every already admitted query is at most the threshold.
// The first in-range query is always admitted.
inline std::size_t count_atomic_queries(const std::vector<std::string>& queries, const AtomicQueryConfig& cfg = {}) {
  cfg.validate();
  std::vector<std::u32string> valid;
  for (const auto& q : queries) {
    auto cand = utf8_decode(collapse_whitespace(q));
    if (cand.size() < cfg.l_min || cand.size() > cfg.l_max) continue;
    const bool diverse = std::all_of(valid.begin(), valid.end(), [&](const std::u32string& v) {
      return similarity_ratio(cand, v) <= cfg.threshold;
    });
    if (diverse) valid.push_back(std::move(cand));
  }
  return valid.size();
}

}  // namespace searchrl
