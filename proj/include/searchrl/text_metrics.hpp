#pragma once

// Answer normalization and the QA answer-quality metrics (EM, token F1, CEM).

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace searchrl {

inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

inline std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_ascii_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_ascii_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Collapses runs of whitespace to one space and trims.
inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  for (const auto& tok : split_whitespace(s)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
// whitespace. Non-ASCII bytes pass through untouched.
inline std::string normalize(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  for (char c : text) {
    if (is_ascii_punct(c)) continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    stripped.push_back(c);
  }
  std::string out;
  for (const auto& tok : split_whitespace(stripped)) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

inline std::vector<std::string> normalized_tokens(std::string_view text) {
  return split_whitespace(normalize(text));
}

// Non-empty list of reference answers, none of which normalizes to "".
class GoldAnswers {
 public:
  GoldAnswers() = delete;
  GoldAnswers(std::vector<std::string> answers) : answers_(std::move(answers)) {
    if (answers_.empty()) throw std::invalid_argument("GoldAnswers: at least one answer is required");
    for (const auto& a : answers_) {
      if (normalize(a).empty())
        throw std::invalid_argument("GoldAnswers: answer '" + a + "' normalizes to the empty string");
    }
  }
  GoldAnswers(std::initializer_list<std::string> answers) : GoldAnswers(std::vector<std::string>(answers)) {}

  const std::vector<std::string>& answers() const { return answers_; }
  auto begin() const { return answers_.begin(); }
  auto end() const { return answers_.end(); }
  std::size_t size() const { return answers_.size(); }

 private:
  std::vector<std::string> answers_;
};

enum class TokenOverlap { Multiset, Set };

inline int exact_match(std::string_view pred, const GoldAnswers& golds) {
  const auto p = normalize(pred);
  for (const auto& g : golds) {
    if (normalize(g) == p) return 1;
  }
  return 0;
}

inline double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                       TokenOverlap mode = TokenOverlap::Multiset) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::size_t overlap = 0;
  double np = 0, ng = 0;
  if (mode == TokenOverlap::Multiset) {
    std::map<std::string, std::size_t> counts;
    for (const auto& t : gold) ++counts[t];
    for (const auto& t : pred) {
      auto it = counts.find(t);
      if (it != counts.end() && it->second > 0) {
        --it->second;
        ++overlap;
      }
    }
    np = static_cast<double>(pred.size());
    ng = static_cast<double>(gold.size());
  } else {
    const std::set<std::string> ps(pred.begin(), pred.end()), gs(gold.begin(), gold.end());
    for (const auto& t : ps) overlap += gs.count(t);
    np = static_cast<double>(ps.size());
    ng = static_cast<double>(gs.size());
  }
  return 2.0 * static_cast<double>(overlap) / (np + ng);
}

// Maximum token F1 over the references.
inline double f1(std::string_view pred, const GoldAnswers& golds, TokenOverlap mode = TokenOverlap::Multiset) {
  const auto p = normalized_tokens(pred);
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, token_f1(p, normalized_tokens(g), mode));
  return best;
}

// 1 iff some normalized gold is a contiguous substring of the normalized container.
inline int cover_exact_match(std::string_view container, const GoldAnswers& golds) {
  const auto c = normalize(container);
  if (c.empty()) return 0;
  for (const auto& g : golds) {
    if (c.find(normalize(g)) != std::string::npos) return 1;
  }
  return 0;
}

}  // namespace searchrl
