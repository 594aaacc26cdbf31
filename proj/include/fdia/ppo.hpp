#pragma once

#include "fdia/env.hpp"
#include "fdia/policy.hpp"

#include <string>
#include <vector>

namespace fdia {

struct TrainConfig {
  double learning_rate = 1e-4;
  double clip_range = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int ppo_epochs = 10;
  int minibatch = 128;
  int train_batch = 10000;       // desk profile; paper profile uses 1e5
  int rollout_fragment = 500;    // must equal the episode length T
  int iterations = 200;

  void validate() const;
};

struct RolloutBuffer {
  Mat obs;      // dim x n
  MatI actions; // heads x n
  Vec logp;
  Vec rewards;
  Vec values;
  std::vector<std::uint8_t> dones;
  Vec advantages;
  Vec returns;

  Eigen::Index size() const { return obs.cols(); }
};

// Standard GAE recursion over one sequence; returns = advantages + values.
// `bootstrap_value` is V(s_T) for the state after the last entry (0 for a
// terminal state).
void gae_advantages(const Eigen::Ref<const Vec>& rewards,
                    const Eigen::Ref<const Vec>& values,
                    const std::vector<std::uint8_t>& dones, double gamma,
                    double lambda, double bootstrap_value, Vec& advantages,
                    Vec& returns);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

struct MinibatchResult {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

// Clipped-surrogate loss on one minibatch; advantages must already be
// normalized. With `backward` set, layer gradients are accumulated (callers
// zero them first).
MinibatchResult ppo_minibatch(PolicyNet& net, const Mat& obs, const MatI& actions,
                              const Eigen::Ref<const Vec>& old_logp,
                              const Eigen::Ref<const Vec>& advantages,
                              const Eigen::Ref<const Vec>& returns,
                              const TrainConfig& cfg, bool backward);

// Policy plus its persistent Adam state.
struct AgentTrainer {
  PolicyNet net;
  nn::Adam adam;

  AgentTrainer(PolicyNet n, const TrainConfig& cfg);
};

// One PPO update: per-buffer advantage normalization, ppo_epochs passes of
// shuffled minibatches, clipped surrogate + entropy bonus + value loss.
UpdateStats ppo_update(AgentTrainer& trainer, const RolloutBuffer& buffer,
                       const TrainConfig& cfg, Rng& rng);

struct EpochStats {
  int epoch = 0;
  double adversary_reward = 0.0;  // mean episode reward
  double defender_reward = 0.0;
  UpdateStats adversary;
  UpdateStats defender;
};

struct MarlResult {
  PolicyNet adversary;
  PolicyNet defender;
  std::vector<EpochStats> history;
};

// Concurrent adversary/defender training: each iteration collects
// train_batch steps from train_batch/T lockstep episodes, computes per-agent
// GAE (the defender's trajectory is the detection-time subsequence), then
// updates both agents. warm_start, when given, seeds the defender.
MarlResult train_marl(const EnvConfig& env_cfg, const TrainConfig& cfg,
                      const OfflineClassifier* warm_start, std::uint64_t seed,
                      int threads = 1);

void save_history_csv(const std::vector<EpochStats>& history,
                      const std::string& path);

}  // namespace fdia
