#pragma once

// The command implementations behind the CLI. Each works on streams so the
// same code runs in-process from tests and from tools/searchrl.

#include <charconv>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "atomic_query.hpp"
#include "config.hpp"
#include "jsonl.hpp"
#include "reward.hpp"
#include "search_env.hpp"
#include "trainer.hpp"

namespace searchrl {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::unordered_map<std::string, const QAExample*> index_dataset(const std::vector<QAExample>& dataset) {
  std::unordered_map<std::string, const QAExample*> by_id;
  for (const auto& ex : dataset)
    if (!by_id.emplace(ex.id, &ex).second) throw IoError("dataset: duplicate id '" + ex.id + "'");
  return by_id;
}

inline std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// --- parse -----------------------------------------------------------------

struct ParseSummary {
  std::size_t parsed = 0;
  std::vector<LineError> errors;
  std::map<std::string, std::size_t> histogram;  // violation kind -> count
  std::vector<std::size_t> violations_per_record;
};

inline ordered_json parsed_form(const std::string& id, const Trajectory& traj,
                                const std::vector<FormatViolation>& violations) {
  ordered_json steps = ordered_json::array();
  for (const auto& s : traj.steps)
    steps.push_back({{"action", std::string(action_name(s.action))}, {"content", s.content}});
  ordered_json viol = ordered_json::array();
  for (const auto& v : violations)
    viol.push_back({{"kind", std::string(violation_name(v.kind))}, {"detail", v.detail}});
  return {{"id", id}, {"steps", std::move(steps)}, {"violations", std::move(viol)}};
}

// Writes the parsed form of every record; malformed lines become
// {"line","error"} records in input order.
inline ParseSummary cmd_parse(std::istream& in, std::ostream& out, const RunConfig& cfg) {
  ParseSummary sum;
  for (auto k : kAllViolationKinds) sum.histogram[std::string(violation_name(k))] = 0;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    std::vector<LineError> errs;
    std::istringstream one(line);
    const auto recs = read_trajectories(one, errs);
    if (!errs.empty()) {
      sum.errors.push_back({n, errs.front().message});
      out << ordered_json{{"line", n}, {"error", errs.front().message}}.dump() << '\n';
      continue;
    }
    const auto traj = parse_trajectory(recs.front().raw);
    const auto violations = validate_format(traj, cfg.reward.grammar);
    for (const auto& v : violations) ++sum.histogram[std::string(violation_name(v.kind))];
    sum.violations_per_record.push_back(violations.size());
    ++sum.parsed;
    out << parsed_form(recs.front().id, traj, violations).dump() << '\n';
  }
  return sum;
}

// --- score -----------------------------------------------------------------

struct ScoreSummary {
  std::size_t scored = 0;
  std::vector<std::string> missing_ids;
  std::vector<LineError> errors;
  double mean_total = 0.0;
  double mean_em = 0.0;
};

inline ordered_json breakdown_json(const std::string& id, const RewardBreakdown& b) {
  return {{"id", id},           {"r_ans", b.r_ans},     {"r_mem", b.r_mem},     {"r_query", b.r_query},
          {"r_format", b.r_format}, {"mu", b.mu},       {"total", b.total},     {"n_query", b.n_query},
          {"n_rules", b.n_rules}, {"em", b.em}};
}

inline ScoreSummary cmd_score(std::istream& trajectories, const std::vector<QAExample>& dataset, std::ostream& out,
                              const RunConfig& cfg, long t_iter) {
  const auto by_id = detail::index_dataset(dataset);
  ScoreSummary sum;
  const auto recs = read_trajectories(trajectories, sum.errors);
  double total = 0.0, em = 0.0;
  for (const auto& r : recs) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      sum.missing_ids.push_back(r.id);
      continue;
    }
    const auto b = score_trajectory(r.raw, it->second->golds, cfg.reward, t_iter);
    out << breakdown_json(r.id, b).dump() << '\n';
    total += b.total;
    em += b.em;
    ++sum.scored;
  }
  if (sum.scored > 0) {
    sum.mean_total = total / static_cast<double>(sum.scored);
    sum.mean_em = em / static_cast<double>(sum.scored);
  }
  out << ordered_json{{"aggregate", true},
                      {"count", sum.scored},
                      {"mean_total", sum.mean_total},
                      {"mean_em", sum.mean_em},
                      {"missing_ids", sum.missing_ids}}
             .dump()
      << '\n';
  return sum;
}

// --- simulate --------------------------------------------------------------

struct SimulateOptions {
  // Explicit template indices; empty means draw `draws` templates per example
  // from the uniform policy.
  std::vector<std::size_t> templates;
  std::size_t draws = 1;
};

inline std::size_t cmd_simulate(const std::vector<QAExample>& dataset, const CorpusIndex& index, const RunConfig& cfg,
                                const SimulateOptions& sim, std::uint64_t seed, std::ostream& out) {
  const auto templates = default_templates();
  for (auto t : sim.templates)
    if (t >= templates.size()) throw ConfigError("simulate: template index " + std::to_string(t) + " out of range");
  const auto uniform = CategoricalPolicy::uniform(templates.size());
  std::mt19937_64 rng(seed);
  std::size_t written = 0;
  for (const auto& ex : dataset) {
    std::vector<std::size_t> chosen = sim.templates;
    if (chosen.empty())
      for (std::size_t d = 0; d < sim.draws; ++d) chosen.push_back(uniform.sample(uniform01(rng)));
    for (auto t : chosen) {
      const auto raw =
          scripted_rollout(ex, templates[t], index, cfg.reward.grammar, cfg.rollout, derive_seed(seed, written));
      out << ordered_json{{"id", ex.id}, {"raw", raw}, {"template", t}}.dump() << '\n';
      ++written;
    }
  }
  return written;
}

// --- train-toy -------------------------------------------------------------

inline void write_curve_csv(const std::vector<CurvePoint>& curve, std::ostream& out) {
  out << "iter,mean_reward,policy_entropy\n";
  for (const auto& p : curve)
    out << p.iter << ',' << detail::shortest(p.mean_reward) << ',' << detail::shortest(p.policy_entropy) << '\n';
}

inline ordered_json policy_json(const CategoricalPolicy& policy, const std::vector<QueryTemplate>& templates) {
  ordered_json names = ordered_json::array();
  for (const auto& t : templates) names.push_back(t.name);
  return {{"templates", names}, {"logits", policy.logits()}, {"probs", policy.probs()}};
}

inline std::vector<CurvePoint> cmd_train_toy(const std::vector<QAExample>& dataset, CorpusIndex index,
                                             const RunConfig& cfg, std::ostream& csv, std::ostream& policy_out) {
  const SearchEnv env(dataset, std::move(index), default_templates(), cfg.reward.grammar, cfg.rollout);
  auto policy = CategoricalPolicy::uniform(env.num_templates());
  auto opts = cfg.train;
  opts.seed = cfg.seed;
  const auto curve = train_toy(env, policy, cfg.grpo, cfg.reward, opts);
  write_curve_csv(curve, csv);
  policy_out << policy_json(policy, env.templates()).dump(2) << '\n';
  return curve;
}

// --- report ----------------------------------------------------------------

struct BehaviorReport {
  double mean_em = 0.0;
  double mean_f1 = 0.0;
  double mean_search_calls = 0.0;
  double mean_query_char_len = 0.0;
  double query_len_variance = 0.0;  // population variance over all queries
  std::optional<double> mean_pairwise_similarity;
  double mean_memory_cem = 0.0;
  std::size_t count = 0;
};

// Mean of ratio(later, earlier) over all query pairs of one trajectory; the
// ratio is not symmetric so the later query is always the first argument.
inline std::optional<double> mean_pairwise_similarity(const std::vector<std::string>& queries) {
  if (queries.size() < 2) return std::nullopt;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 1; i < queries.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      sum += similarity_ratio(collapse_whitespace(queries[i]), collapse_whitespace(queries[j]));
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

struct ReportResult {
  BehaviorReport report;
  std::vector<std::string> missing_ids;
  std::vector<LineError> errors;
};

inline ReportResult cmd_report(std::istream& trajectories, const std::vector<QAExample>& dataset,
                               const RunConfig& cfg) {
  const auto by_id = detail::index_dataset(dataset);
  ReportResult res;
  const auto recs = read_trajectories(trajectories, res.errors);
  double em = 0, f1s = 0, calls = 0, cem = 0, sim_sum = 0;
  std::size_t sim_n = 0;
  std::vector<double> lengths;
  for (const auto& r : recs) {
    const auto it = by_id.find(r.id);
    if (it == by_id.end()) {
      res.missing_ids.push_back(r.id);
      continue;
    }
    const auto& golds = it->second->golds;
    const auto traj = parse_trajectory(r.raw);
    const auto parts = extract_parts(traj);
    em += parts.answer ? exact_match(*parts.answer, golds) : 0;
    f1s += outcome_reward(parts.answer, golds, cfg.reward.overlap);
    calls += static_cast<double>(count_search_calls(traj));
    cem += memory_reward(parts.memories, golds);
    for (const auto& q : parts.queries) lengths.push_back(static_cast<double>(char_length(collapse_whitespace(q))));
    if (auto s = mean_pairwise_similarity(parts.queries)) {
      sim_sum += *s;
      ++sim_n;
    }
    ++res.report.count;
  }
  if (res.report.count == 0) throw IoError("report: no trajectories to report on");
  const double n = static_cast<double>(res.report.count);
  auto& rep = res.report;
  rep.mean_em = em / n;
  rep.mean_f1 = f1s / n;
  rep.mean_search_calls = calls / n;
  rep.mean_memory_cem = cem / n;
  if (!lengths.empty()) {
    double s = 0;
    for (double l : lengths) s += l;
    rep.mean_query_char_len = s / static_cast<double>(lengths.size());
    double v = 0;
    for (double l : lengths) v += (l - rep.mean_query_char_len) * (l - rep.mean_query_char_len);
    rep.query_len_variance = v / static_cast<double>(lengths.size());
  }
  if (sim_n > 0) rep.mean_pairwise_similarity = sim_sum / static_cast<double>(sim_n);
  return res;
}

inline ordered_json report_json(const BehaviorReport& r) {
  return {{"count", r.count},
          {"mean_em", r.mean_em},
          {"mean_f1", r.mean_f1},
          {"mean_search_calls", r.mean_search_calls},
          {"mean_query_char_len", r.mean_query_char_len},
          {"query_len_variance", r.query_len_variance},
          {"mean_pairwise_similarity",
           r.mean_pairwise_similarity ? ordered_json(*r.mean_pairwise_similarity) : ordered_json(nullptr)},
          {"mean_memory_cem", r.mean_memory_cem}};
}

}  // namespace searchrl
