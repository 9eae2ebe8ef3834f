#pragma once

// Group-relative advantages and the clipped, KL-regularized GRPO objective
// over token log-probabilities with a loss mask, plus a categorical policy
// and a finite-difference gradient checker for the desk-scale trainer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace searchrl {

struct GrpoConfig {
  double epsilon = 0.2;     // clip range
  double beta = 0.001;      // KL weight
  double std_floor = 1e-6;  // advantage denominator guard

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("GrpoConfig: epsilon must lie in (0,1)");
    if (!(beta >= 0.0)) throw std::invalid_argument("GrpoConfig: beta must be >= 0");
    if (!(std_floor > 0.0)) throw std::invalid_argument("GrpoConfig: std_floor must be > 0");
  }
};

// (R_i - mean(R)) / max(std(R), std_floor) with the population standard
// deviation. A group of identical rewards yields all zeros.
inline std::vector<double> group_advantages(std::span<const double> rewards, double std_floor = 1e-6) {
  if (rewards.size() < 2) throw std::invalid_argument("group_advantages: group size must be >= 2");
  if (!(std_floor > 0.0)) throw std::invalid_argument("group_advantages: std_floor must be > 0");
  const double n = static_cast<double>(rewards.size());
  std::vector<double> adv(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) return adv;
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double denom = std::max(std::sqrt(var / n), std_floor);
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

// Per-token log-probabilities of one sampled sequence. mask[t] == 1 marks a
// model-generated token; 0 marks environment-injected (retrieved) text.
struct TokenSequence {
  std::vector<double> logp_new;
  std::vector<double> logp_old;
  std::vector<double> logp_ref;
  std::vector<int> mask;

  std::size_t size() const { return logp_new.size(); }
  std::size_t active_tokens() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  }
};

struct TokenBatch {
  std::vector<TokenSequence> sequences;

  std::size_t group_size() const { return sequences.size(); }

  void validate() const {
    if (sequences.empty()) throw std::invalid_argument("TokenBatch: empty group");
    for (std::size_t i = 0; i < sequences.size(); ++i) {
      const auto& s = sequences[i];
      const auto n = s.size();
      if (s.logp_old.size() != n || s.logp_ref.size() != n || s.mask.size() != n)
        throw std::invalid_argument("TokenBatch: sequence " + std::to_string(i) + " has mismatched array lengths");
      for (std::size_t t = 0; t < n; ++t) {
        if (s.mask[t] != 0 && s.mask[t] != 1)
          throw std::invalid_argument("TokenBatch: mask entries must be 0 or 1");
        if (s.mask[t] == 1 && (s.logp_new[t] > 0.0 || s.logp_old[t] > 0.0 || s.logp_ref[t] > 0.0))
          throw std::invalid_argument("TokenBatch: log-probabilities must be <= 0");
      }
      if (s.active_tokens() == 0)
        throw std::invalid_argument("TokenBatch: sequence " + std::to_string(i) + " has no masked-in tokens");
    }
  }
};

// k3 estimator of KL[pi_theta || pi_ref] for one token; always >= 0.
inline double kl_k3(double logp_new, double logp_ref) {
  const double d = logp_ref - logp_new;
  return std::exp(d) - d - 1.0;
}

namespace detail {

inline void check_advantages(const TokenBatch& batch, std::span<const double> advantages, const GrpoConfig& cfg) {
  cfg.validate();
  batch.validate();
  if (advantages.size() != batch.group_size())
    throw std::invalid_argument("grpo_objective: advantages size does not match group size");
}

}  // namespace detail

// Objective to maximize:
//   1/G sum_i 1/|y_i| sum_{t: mask=1} [ min(r A_i, clip(r, 1-eps, 1+eps) A_i) - beta kl_t ]
// with r = exp(logp_new - logp_old). Masked-out tokens are never read.
inline double grpo_objective(const TokenBatch& batch, std::span<const double> advantages, const GrpoConfig& cfg) {
  detail::check_advantages(batch, advantages, cfg);
  double total = 0.0;
  for (std::size_t i = 0; i < batch.group_size(); ++i) {
    const auto& s = batch.sequences[i];
    const double a = advantages[i];
    double seq = 0.0;
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (s.mask[t] != 1) continue;
      const double r = std::exp(s.logp_new[t] - s.logp_old[t]);
      const double clipped = std::clamp(r, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
      seq += std::min(r * a, clipped * a) - cfg.beta * kl_k3(s.logp_new[t], s.logp_ref[t]);
    }
    total += seq / static_cast<double>(s.active_tokens());
  }
  return total / static_cast<double>(batch.group_size());
}

// d objective / d logp_new[i][t]. Zero on masked-out tokens and wherever the
// clipped branch is the active minimum.
inline std::vector<std::vector<double>> grpo_objective_grad(const TokenBatch& batch,
                                                            std::span<const double> advantages,
                                                            const GrpoConfig& cfg) {
  detail::check_advantages(batch, advantages, cfg);
  const double inv_g = 1.0 / static_cast<double>(batch.group_size());
  std::vector<std::vector<double>> grad(batch.group_size());
  for (std::size_t i = 0; i < batch.group_size(); ++i) {
    const auto& s = batch.sequences[i];
    const double a = advantages[i];
    const double w = inv_g / static_cast<double>(s.active_tokens());
    grad[i].assign(s.size(), 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (s.mask[t] != 1) continue;
      const double r = std::exp(s.logp_new[t] - s.logp_old[t]);
      const double clipped = std::clamp(r, 1.0 - cfg.epsilon, 1.0 + cfg.epsilon);
      const double surrogate = r * a <= clipped * a ? r * a : 0.0;
      const double kl = cfg.beta * (std::exp(s.logp_ref[t] - s.logp_new[t]) - 1.0);
      grad[i][t] = w * (surrogate + kl);
    }
  }
  return grad;
}

// Softmax policy over K discrete actions.
class CategoricalPolicy {
 public:
  CategoricalPolicy() = default;
  explicit CategoricalPolicy(std::vector<double> logits) : logits_(std::move(logits)) {
    if (logits_.empty()) throw std::invalid_argument("CategoricalPolicy: need at least one action");
    for (double l : logits_)
      if (!std::isfinite(l)) throw std::invalid_argument("CategoricalPolicy: logits must be finite");
  }
  static CategoricalPolicy uniform(std::size_t k) { return CategoricalPolicy(std::vector<double>(k, 0.0)); }

  std::size_t size() const { return logits_.size(); }
  const std::vector<double>& logits() const { return logits_; }
  std::vector<double>& logits() { return logits_; }

  std::vector<double> log_probs() const {
    const double m = *std::max_element(logits_.begin(), logits_.end());
    double z = 0.0;
    for (double l : logits_) z += std::exp(l - m);
    const double lse = m + std::log(z);
    std::vector<double> out(logits_.size());
    for (std::size_t j = 0; j < logits_.size(); ++j) out[j] = logits_[j] - lse;
    return out;
  }

  std::vector<double> probs() const {
    auto lp = log_probs();
    for (double& x : lp) x = std::exp(x);
    return lp;
  }

  double entropy() const {
    double h = 0.0;
    const auto lp = log_probs();
    for (double l : lp) h -= std::exp(l) * l;
    return h;
  }

  // Inverse-CDF draw for a uniform variate u in [0,1).
  std::size_t sample(double u) const {
    const auto p = probs();
    double acc = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      acc += p[j];
      if (u < acc) return j;
    }
    for (std::size_t j = p.size(); j-- > 0;)
      if (p[j] > 0.0) return j;
    return p.size() - 1;
  }

 private:
  std::vector<double> logits_;
};

inline double policy_logprob(const CategoricalPolicy& policy, std::size_t action) {
  if (action >= policy.size())
    throw std::out_of_range("policy_logprob: action " + std::to_string(action) + " out of range");
  return policy.log_probs()[action];
}

// d log softmax(logits)[action] / d logits = onehot(action) - p.
inline std::vector<double> policy_logprob_grad(const CategoricalPolicy& policy, std::size_t action) {
  if (action >= policy.size())
    throw std::out_of_range("policy_logprob_grad: action " + std::to_string(action) + " out of range");
  auto g = policy.probs();
  for (double& x : g) x = -x;
  g[action] += 1.0;
  return g;
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
  bool pass = false;
};

// Central finite differences against an analytic gradient. The relative error
// of coordinate k is |a_k - n_k| / max(|a_k|, |n_k|, scale_floor).
inline GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& objective,
                                  const std::function<std::vector<double>(const std::vector<double>&)>& gradient,
                                  std::vector<double> params, double step, double tolerance,
                                  double scale_floor = 1e-6) {
  GradCheckReport rep;
  rep.analytic = gradient(params);
  if (rep.analytic.size() != params.size()) throw std::invalid_argument("grad_check: gradient size mismatch");
  rep.numeric.resize(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + step;
    const double fp = objective(params);
    params[k] = saved - step;
    const double fm = objective(params);
    params[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw std::domain_error("grad_check: non-finite objective");
    rep.numeric[k] = (fp - fm) / (2.0 * step);
    const double abs_err = std::abs(rep.analytic[k] - rep.numeric[k]);
    const double rel = abs_err / std::max({std::abs(rep.analytic[k]), std::abs(rep.numeric[k]), scale_floor});
    rep.max_abs_error = std::max(rep.max_abs_error, abs_err);
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_index = k;
    }
  }
  rep.pass = rep.max_rel_error <= tolerance;
  return rep;
}

}  // namespace searchrl
