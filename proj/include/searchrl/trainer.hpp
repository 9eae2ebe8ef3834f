#pragma once

// Desk-scale GRPO loop: a categorical policy over query templates, rolled out
// in the scripted search environment and scored by the dense reward.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "grpo.hpp"
#include "reward.hpp"
#include "search_env.hpp"

namespace searchrl {

struct CurvePoint {
  long iter = 0;
  double mean_reward = 0.0;
  double policy_entropy = 0.0;
};

// Token view of a rollout group: one model-generated token per trajectory
// (the template choice) followed by one environment-injected token per
// <documents> block, which the mask excludes.
inline TokenBatch build_token_batch(const std::vector<std::size_t>& actions,
                                    const std::vector<std::size_t>& documents_blocks, const CategoricalPolicy& current,
                                    const CategoricalPolicy& old, const CategoricalPolicy& ref) {
  const auto lp_new = current.log_probs(), lp_old = old.log_probs(), lp_ref = ref.log_probs();
  TokenBatch batch;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    TokenSequence s;
    const auto a = actions[i];
    s.logp_new.push_back(lp_new.at(a));
    s.logp_old.push_back(lp_old.at(a));
    s.logp_ref.push_back(lp_ref.at(a));
    s.mask.push_back(1);
    const std::size_t injected = i < documents_blocks.size() ? documents_blocks[i] : 0;
    for (std::size_t d = 0; d < injected; ++d) {
      s.logp_new.push_back(0.0);
      s.logp_old.push_back(0.0);
      s.logp_ref.push_back(0.0);
      s.mask.push_back(0);
    }
    batch.sequences.push_back(std::move(s));
  }
  return batch;
}

// Chain rule from per-token objective gradients to the policy logits. Only
// the template-choice token depends on the logits.
inline std::vector<double> logits_gradient(const std::vector<std::vector<double>>& token_grad,
                                           const std::vector<std::size_t>& actions, const CategoricalPolicy& current) {
  std::vector<double> g(current.size(), 0.0);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto dlogp = policy_logprob_grad(current, actions[i]);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += token_grad[i][0] * dlogp[j];
  }
  return g;
}

struct TrainOptions {
  long iters = 200;
  std::size_t group_size = 10;
  double lr = 0.5;
  std::uint64_t seed = 0;
};

// One ascent step per iteration on the GRPO objective. The old policy is the
// snapshot taken at the start of the iteration; the reference policy is the
// policy as passed in. Deterministic given the seed.
inline std::vector<CurvePoint> train_toy(const SearchEnv& env, CategoricalPolicy& policy, const GrpoConfig& cfg,
                                         const RewardConfig& reward_cfg, const TrainOptions& opts) {
  cfg.validate();
  reward_cfg.validate();
  if (opts.group_size < 2) throw std::invalid_argument("train_toy: group size must be >= 2");
  if (opts.iters < 0) throw std::invalid_argument("train_toy: iters must be >= 0");
  if (policy.size() != env.num_templates())
    throw std::invalid_argument("train_toy: policy size does not match the number of templates");

  const CategoricalPolicy ref = policy;
  std::mt19937_64 rng(opts.seed);
  std::vector<CurvePoint> curve;
  curve.reserve(static_cast<std::size_t>(opts.iters));

  for (long t = 0; t < opts.iters; ++t) {
    const QAExample& ex = env.sample_question(rng);
    const CategoricalPolicy old = policy;

    std::vector<std::size_t> actions;
    std::vector<std::size_t> doc_blocks;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < opts.group_size; ++i) {
      const auto a = old.sample(uniform01(rng));
      const auto raw = env.rollout(ex, a, rng());
      const auto traj = parse_trajectory(raw);
      std::size_t docs = 0;
      for (const auto& s : traj.steps) docs += s.action == Action::Documents;
      actions.push_back(a);
      doc_blocks.push_back(docs);
      rewards.push_back(score_trajectory(traj, ex.golds, reward_cfg, t).total);
    }

    const auto adv = group_advantages(rewards, cfg.std_floor);
    const auto batch = build_token_batch(actions, doc_blocks, policy, old, ref);
    const auto grad = logits_gradient(grpo_objective_grad(batch, adv, cfg), actions, policy);
    for (std::size_t j = 0; j < grad.size(); ++j) policy.logits()[j] += opts.lr * grad[j];

    double mean = 0.0;
    for (double r : rewards) mean += r;
    curve.push_back({t, mean / static_cast<double>(rewards.size()), policy.entropy()});
  }
  return curve;
}

}  // namespace searchrl
