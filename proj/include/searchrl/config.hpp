#pragma once

// Run configuration. The JSON key set mirrors the RL hyperparameter table
// names; every key is optional and unknown keys are rejected.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "grpo.hpp"
#include "reward.hpp"
#include "search_env.hpp"
#include "trainer.hpp"

namespace searchrl {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  RewardConfig reward;
  GrpoConfig grpo;
  RolloutOptions rollout;
  TrainOptions train;
  std::size_t retriever_k = 3;
  std::uint64_t seed = 0;
  std::string corpus_path;
  std::string dataset_path;

  // Keeps the copies of shared settings in sync.
  void set_max_search_actions(int t_max) {
    reward.t_max = t_max;
    reward.grammar.t_max = t_max;
  }
  void set_retriever_k(std::size_t k) {
    retriever_k = k;
    rollout.k = k;
  }

  void validate() const {
    try {
      reward.validate();
      grpo.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (retriever_k < 1) throw ConfigError("retriever_topk must be >= 1");
    if (train.group_size < 2) throw ConfigError("group_size must be >= 2");
    if (train.iters < 0) throw ConfigError("total_training_steps must be >= 0");
    if (rollout.max_doc_chars < 1) throw ConfigError("max_documents_length must be >= 1");
  }
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "alpha") c.reward.alpha = v.get<double>();
      else if (key == "gamma") c.reward.gamma = v.get<double>();
      else if (key == "t_decay") c.reward.t_decay = v.get<int>();
      else if (key == "max_search_actions") c.set_max_search_actions(v.get<int>());
      else if (key == "l_min") c.reward.atomic.l_min = v.get<std::size_t>();
      else if (key == "l_max") c.reward.atomic.l_max = v.get<std::size_t>();
      else if (key == "similarity_threshold") c.reward.atomic.threshold = v.get<double>();
      else if (key == "strict_order") c.reward.grammar.strict_order = v.get<bool>();
      else if (key == "penalize_missing_answer") c.reward.grammar.penalize_missing_answer = v.get<bool>();
      else if (key == "correctness") {
        const auto s = v.get<std::string>();
        if (s == "em") c.reward.correctness = CorrectnessRule::ExactMatch;
        else if (s == "cem") c.reward.correctness = CorrectnessRule::CoverExactMatch;
        else throw ConfigError("config: correctness must be \"em\" or \"cem\"");
      } else if (key == "f1_overlap") {
        const auto s = v.get<std::string>();
        if (s == "multiset") c.reward.overlap = TokenOverlap::Multiset;
        else if (s == "set") c.reward.overlap = TokenOverlap::Set;
        else throw ConfigError("config: f1_overlap must be \"multiset\" or \"set\"");
      }
      else if (key == "clip_ratio") c.grpo.epsilon = v.get<double>();
      else if (key == "kl_coefficient") c.grpo.beta = v.get<double>();
      else if (key == "std_floor") c.grpo.std_floor = v.get<double>();
      else if (key == "group_size") c.train.group_size = v.get<std::size_t>();
      else if (key == "learning_rate") c.train.lr = v.get<double>();
      else if (key == "total_training_steps") c.train.iters = v.get<long>();
      else if (key == "retriever_topk") c.set_retriever_k(v.get<std::size_t>());
      else if (key == "max_documents_length") c.rollout.max_doc_chars = v.get<std::size_t>();
      else if (key == "memory_sentences") c.rollout.memory_sentences = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "corpus") c.corpus_path = v.get<std::string>();
      else if (key == "dataset") c.dataset_path = v.get<std::string>();
      else throw ConfigError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace searchrl
