#pragma once

// Dense trajectory reward: outcome F1, memory cover, atomic-query and format
// terms, with a cosine-decayed weight on the query term.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "atomic_query.hpp"
#include "text_metrics.hpp"
#include "trajectory.hpp"

namespace searchrl {

// How "the answer is correct" is decided for the query reward.
enum class CorrectnessRule { ExactMatch, CoverExactMatch };

struct RewardConfig {
  double alpha = 0.1;   // memory weight
  double gamma = 0.01;  // query and format weight
  int t_max = 5;
  int t_decay = 150;
  CorrectnessRule correctness = CorrectnessRule::ExactMatch;
  TokenOverlap overlap = TokenOverlap::Multiset;
  AtomicQueryConfig atomic;
  GrammarConfig grammar;

  void validate() const {
    if (!(alpha >= 0.0)) throw std::invalid_argument("RewardConfig: alpha must be >= 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("RewardConfig: gamma must be >= 0");
    if (t_max < 1) throw std::invalid_argument("RewardConfig: t_max must be >= 1");
    if (t_decay < 1) throw std::invalid_argument("RewardConfig: t_decay must be >= 1");
    atomic.validate();
    grammar.validate();
  }
};

struct RewardBreakdown {
  double r_ans = 0.0;
  int r_mem = 0;
  int r_query = 0;
  int r_format = 0;
  double mu = 0.0;
  double total = 0.0;
  int n_query = 0;
  int n_rules = 0;
  bool answer_correct = false;
  int em = 0;
};

inline int query_reward(bool answer_correct, int n_query, int t_max) {
  if (n_query < 0) throw std::invalid_argument("query_reward: n_query must be >= 0");
  if (t_max < 1) throw std::invalid_argument("query_reward: t_max must be >= 1");
  return answer_correct ? -std::max(1, n_query) : std::min(t_max, n_query);
}

// Cover exact match over all memory blocks joined with newlines.
inline int memory_reward(const std::vector<std::string>& memories, const GoldAnswers& golds) {
  std::string joined;
  for (std::size_t i = 0; i < memories.size(); ++i) {
    if (i) joined.push_back('\n');
    joined += memories[i];
  }
  return cover_exact_match(joined, golds);
}

inline int format_reward(int n_rules) {
  if (n_rules < 0) throw std::invalid_argument("format_reward: n_rules must be >= 0");
  return -n_rules;
}

inline double outcome_reward(const std::optional<std::string>& answer, const GoldAnswers& golds,
                             TokenOverlap mode = TokenOverlap::Multiset) {
  return answer ? f1(*answer, golds, mode) : 0.0;
}

inline double decay_factor(long t_iter, long t_decay) {
  if (t_decay < 1) throw std::invalid_argument("decay_factor: t_decay must be >= 1");
  if (t_iter < 0) throw std::invalid_argument("decay_factor: t_iter must be >= 0");
  if (t_iter > t_decay) return 0.0;
  const double x = static_cast<double>(t_iter) / static_cast<double>(t_decay);
  return 0.5 * (std::cos(x * std::numbers::pi) + 1.0);
}

inline double combine(const RewardBreakdown& b, const RewardConfig& cfg) {
  return b.r_ans + cfg.alpha * b.r_mem + cfg.gamma * b.mu * b.r_query + cfg.gamma * b.r_format;
}

inline RewardBreakdown score_trajectory(const Trajectory& traj, const GoldAnswers& golds, const RewardConfig& cfg,
                                        long t_iter) {
  cfg.validate();
  RewardBreakdown b;
  b.n_rules = static_cast<int>(validate_format(traj, cfg.grammar).size());
  const auto parts = extract_parts(traj);
  b.n_query = static_cast<int>(count_atomic_queries(parts.queries, cfg.atomic));
  b.em = parts.answer ? exact_match(*parts.answer, golds) : 0;
  if (cfg.correctness == CorrectnessRule::ExactMatch)
    b.answer_correct = b.em == 1;
  else
    b.answer_correct = parts.answer && cover_exact_match(*parts.answer, golds) == 1;
  b.r_ans = outcome_reward(parts.answer, golds, cfg.overlap);
  b.r_mem = memory_reward(parts.memories, golds);
  b.r_query = query_reward(b.answer_correct, b.n_query, cfg.t_max);
  b.r_format = format_reward(b.n_rules);
  b.mu = decay_factor(t_iter, cfg.t_decay);
  b.total = combine(b, cfg);
  return b;
}

inline RewardBreakdown score_trajectory(const std::string& raw, const GoldAnswers& golds, const RewardConfig& cfg,
                                        long t_iter) {
  return score_trajectory(parse_trajectory(raw), golds, cfg, t_iter);
}

}  // namespace searchrl
