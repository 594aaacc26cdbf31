#include "fdia/ppo.hpp"

#include "fdia/io.hpp"
#include "fdia/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace fdia {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
  if (!(clip_range > 0.0 && clip_range < 1.0)) {
    throw ConfigError("train: clip_range must lie in (0, 1)");
  }
  if (!(entropy_coef >= 0.0)) throw ConfigError("train: entropy_coef must be >= 0");
  if (!(value_coef >= 0.0)) throw ConfigError("train: value_coef must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw ConfigError("train: gae_lambda must lie in [0, 1]");
  }
  if (ppo_epochs < 1) throw ConfigError("train: ppo_epochs must be >= 1");
  if (minibatch < 1) throw ConfigError("train: minibatch must be >= 1");
  if (minibatch > train_batch) throw ConfigError("train: minibatch must be <= train_batch");
  if (rollout_fragment < 1) throw ConfigError("train: rollout_fragment must be >= 1");
  if (train_batch % rollout_fragment != 0) {
    throw ConfigError("train: train_batch must be a multiple of rollout_fragment");
  }
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
}

void gae_advantages(const Eigen::Ref<const Vec>& rewards,
                    const Eigen::Ref<const Vec>& values,
                    const std::vector<std::uint8_t>& dones, double gamma,
                    double lambda, double bootstrap_value, Vec& advantages,
                    Vec& returns) {
  const auto n = rewards.size();
  if (values.size() != n || static_cast<Eigen::Index>(dones.size()) != n) {
    throw std::invalid_argument("gae_advantages: length mismatch");
  }
  advantages.resize(n);
  returns.resize(n);
  double next_advantage = 0.0;
  double next_value = bootstrap_value;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double not_done = dones[static_cast<std::size_t>(t)] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * not_done - values[t];
    next_advantage = delta + gamma * lambda * not_done * next_advantage;
    advantages[t] = next_advantage;
    next_value = values[t];
  }
  returns = advantages + values;
}

AgentTrainer::AgentTrainer(PolicyNet n, const TrainConfig& cfg)
    : net(std::move(n)),
      adam(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8}) {
  adam.add(net.l1);
  adam.add(net.l2);
  for (auto& h : net.heads) adam.add(h);
  adam.add(net.value_head);
}

MinibatchResult ppo_minibatch(PolicyNet& net, const Mat& obs, const MatI& actions,
                              const Eigen::Ref<const Vec>& old_logp,
                              const Eigen::Ref<const Vec>& advantages,
                              const Eigen::Ref<const Vec>& returns,
                              const TrainConfig& cfg, bool backward) {
  const Eigen::Index batch = obs.cols();
  const auto n_heads = net.heads.size();
  const PolicyForward fwd = net.forward(obs);

  // Per-head log-probabilities kept in log space so vanishing classes stay
  // finite, plus the joint log-probability of the sampled actions.
  std::vector<Mat> head_logp(n_heads);
  Vec new_logp = Vec::Zero(batch);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Vec lse = nn::log_sum_exp(fwd.head_logits[h]);
    head_logp[h] = fwd.head_logits[h];
    for (Eigen::Index k = 0; k < batch; ++k) {
      head_logp[h].col(k).array() -= lse[k];
      new_logp[k] += head_logp[h](actions(static_cast<Eigen::Index>(h), k), k);
    }
  }
  const Vec ratio = (new_logp - old_logp).array().exp();

  // Branch selection for the clipped surrogate; ties keep the unclipped
  // branch so the gradient flows at ratio == 1.
  const double lo_clip = 1.0 - cfg.clip_range;
  const double hi_clip = 1.0 + cfg.clip_range;
  Vec surrogate(batch);
  std::vector<bool> unclipped(static_cast<std::size_t>(batch));
  double clipped_count = 0.0;
  for (Eigen::Index k = 0; k < batch; ++k) {
    const double r = ratio[k];
    const double plain = r * advantages[k];
    const double clamped = std::clamp(r, lo_clip, hi_clip) * advantages[k];
    unclipped[static_cast<std::size_t>(k)] = plain <= clamped;
    surrogate[k] = std::min(plain, clamped);
    if (std::abs(r - 1.0) > cfg.clip_range) clipped_count += 1.0;
  }

  MinibatchResult out;
  out.policy_loss = -surrogate.mean();

  std::vector<Mat> head_p(n_heads);
  std::vector<Vec> head_entropy(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    head_p[h] = head_logp[h].array().exp();
    head_entropy[h] =
        -(head_p[h].array() * head_logp[h].array()).colwise().sum();
    out.entropy += head_entropy[h].mean();
  }
  const Vec value_err = fwd.values - returns;
  out.value_loss = value_err.array().square().mean();
  out.clip_fraction = clipped_count / static_cast<double>(batch);

  out.total = out.policy_loss - cfg.entropy_coef * out.entropy +
              cfg.value_coef * out.value_loss;
  if (!std::isfinite(out.total)) {
    throw NumericError("ppo_update: non-finite loss");
  }
  if (!backward) return out;

  // d(total)/dlogits per head and d(total)/dvalues.
  const double inv_b = 1.0 / static_cast<double>(batch);
  std::vector<Mat> dlogits(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Mat& p = head_p[h];
    Mat d = Mat::Zero(p.rows(), batch);
    for (Eigen::Index k = 0; k < batch; ++k) {
      // Policy gradient through the sampled action's log-probability.
      if (unclipped[static_cast<std::size_t>(k)]) {
        const double coef = -advantages[k] * ratio[k] * inv_b;
        d.col(k) = -coef * p.col(k);
        d(actions(static_cast<Eigen::Index>(h), k), k) += coef;
      }
      // Entropy term: dH/dz_j = -p_j (log p_j + H).
      const double hk = head_entropy[h][k];
      d.col(k).array() += cfg.entropy_coef * inv_b * p.col(k).array() *
                          (head_logp[h].col(k).array() + hk);
    }
    dlogits[h] = std::move(d);
  }
  const Eigen::RowVectorXd dvalues =
      (cfg.value_coef * 2.0 * inv_b) * value_err.transpose();
  net.backward(fwd, dlogits, dvalues);
  return out;
}

UpdateStats ppo_update(AgentTrainer& trainer, const RolloutBuffer& buffer,
                       const TrainConfig& cfg, Rng& rng) {
  const auto n = buffer.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty buffer");
  if (buffer.advantages.size() != n || buffer.returns.size() != n) {
    throw std::invalid_argument("ppo_update: advantages not computed");
  }
  PolicyNet& net = trainer.net;

  // Advantage normalization across the whole buffer.
  const double adv_mean = buffer.advantages.mean();
  const double adv_var =
      (buffer.advantages.array() - adv_mean).square().sum() / static_cast<double>(n);
  const double adv_std = std::max(std::sqrt(adv_var), 1e-8);
  const Vec norm_adv = (buffer.advantages.array() - adv_mean) / adv_std;

  UpdateStats stats;
  long minibatches = 0;

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);

  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    rng.shuffle(idx);
    for (Eigen::Index lo = 0; lo < n; lo += cfg.minibatch) {
      const Eigen::Index hi = std::min<Eigen::Index>(n, lo + cfg.minibatch);
      const Eigen::Index batch = hi - lo;

      Mat obs(buffer.obs.rows(), batch);
      MatI actions(buffer.actions.rows(), batch);
      Vec old_logp(batch), adv(batch), ret(batch);
      for (Eigen::Index k = 0; k < batch; ++k) {
        const Eigen::Index src = idx[static_cast<std::size_t>(lo + k)];
        obs.col(k) = buffer.obs.col(src);
        actions.col(k) = buffer.actions.col(src);
        old_logp[k] = buffer.logp[src];
        adv[k] = norm_adv[src];
        ret[k] = buffer.returns[src];
      }

      net.zero_grad();
      const MinibatchResult r =
          ppo_minibatch(net, obs, actions, old_logp, adv, ret, cfg, true);
      trainer.adam.step();

      stats.policy_loss += r.policy_loss;
      stats.value_loss += r.value_loss;
      stats.entropy += r.entropy;
      stats.clip_fraction += r.clip_fraction;
      ++minibatches;
    }
  }

  const double inv_m = 1.0 / static_cast<double>(minibatches);
  stats.policy_loss *= inv_m;
  stats.value_loss *= inv_m;
  stats.entropy *= inv_m;
  stats.clip_fraction *= inv_m;
  return stats;
}

namespace {

RolloutBuffer make_buffer(int obs_dim, int n_heads, Eigen::Index n) {
  RolloutBuffer b;
  b.obs = Mat::Zero(obs_dim, n);
  b.actions = MatI::Zero(n_heads, n);
  b.logp = Vec::Zero(n);
  b.rewards = Vec::Zero(n);
  b.values = Vec::Zero(n);
  b.dones.assign(static_cast<std::size_t>(n), 0);
  return b;
}

// Residuals for all lockstep environments at the current detection step.
Mat batched_defender_obs(const EnvConfig& cfg,
                         const std::vector<EpisodeContext>& envs) {
  const int len = cfg.window - 1;
  const int dim = 2 * cfg.grid->n_buses;
  const auto n_envs = static_cast<Eigen::Index>(envs.size());
  const int t = envs.front().current_step;
  std::vector<Mat> steps(static_cast<std::size_t>(len), Mat(dim, n_envs));
  Mat actual(dim, n_envs);
  for (Eigen::Index e = 0; e < n_envs; ++e) {
    const auto& observed = envs[static_cast<std::size_t>(e)].observed;
    for (int s = 0; s < len; ++s) {
      steps[static_cast<std::size_t>(s)].col(e) =
          pack_state(observed[static_cast<std::size_t>(t - len + s)]);
    }
    actual.col(e) = pack_state(observed[static_cast<std::size_t>(t)]);
  }
  const Mat predicted = cfg.predictor->predict_next_batch(steps);
  return cfg.residual_scale * (actual - predicted);
}

}  // namespace

MarlResult train_marl(const EnvConfig& env_cfg, const TrainConfig& cfg,
                      const OfflineClassifier* warm_start, std::uint64_t seed,
                      int threads) {
  env_cfg.validate();
  cfg.validate();
  const int T = env_cfg.grid->steps;
  if (cfg.rollout_fragment != T) {
    throw ConfigError("train: rollout_fragment must equal the episode length T");
  }
  const int n_envs = cfg.train_batch / cfg.rollout_fragment;
  const int n_buses = env_cfg.grid->n_buses;
  const auto det_times = detection_times(T, env_cfg.window);
  const int n_det = static_cast<int>(det_times.size());
  if (n_det == 0) throw ConfigError("train: no detection steps in an episode");

  // Stream tags: 1 init, then per iteration one sampling stream and one
  // block of per-environment reset streams.
  Rng init_rng(Rng::derive(seed, 1ULL << 40));

  PolicyNet adversary = make_adversary_policy(n_buses, init_rng);
  PolicyNet defender = warm_start != nullptr
                           ? warm_start_defender(*warm_start, init_rng)
                           : make_defender_policy(n_buses, init_rng);

  AgentTrainer adv_trainer(std::move(adversary), cfg);
  AgentTrainer def_trainer(std::move(defender), cfg);

  MarlResult result;
  result.history.reserve(static_cast<std::size_t>(cfg.iterations));

  const Eigen::Index adv_n = static_cast<Eigen::Index>(n_envs) * T;
  const Eigen::Index def_n = static_cast<Eigen::Index>(n_envs) * n_det;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    RolloutBuffer adv_buf = make_buffer(2 * n_buses + 1, 3, adv_n);
    RolloutBuffer def_buf = make_buffer(2 * n_buses, 1, def_n);

    std::vector<EpisodeContext> envs(static_cast<std::size_t>(n_envs));
    parallel_for(n_envs, threads, [&](long e) {
      Rng env_rng(Rng::derive(
          seed, 2ULL + static_cast<std::uint64_t>(iter) *
                           (static_cast<std::uint64_t>(n_envs) + 1) +
                    static_cast<std::uint64_t>(e)));
      envs[static_cast<std::size_t>(e)] = reset(env_cfg, env_rng);
    });
    Rng act_rng(Rng::derive(seed, (1ULL << 41) + static_cast<std::uint64_t>(iter)));

    std::vector<int> det_count(static_cast<std::size_t>(n_envs), 0);
    std::vector<AdversaryAction> actions(static_cast<std::size_t>(n_envs));
    std::vector<std::optional<int>> def_actions(static_cast<std::size_t>(n_envs));

    for (int t = 0; t < T; ++t) {
      Mat obs(2 * n_buses + 1, n_envs);
      for (int e = 0; e < n_envs; ++e) {
        obs.col(e) = adversary_observation(env_cfg, envs[static_cast<std::size_t>(e)]);
      }
      const PolicyForward adv_fwd = adv_trainer.net.forward(obs);

      const bool detection = is_detection_step(envs.front());
      Mat residuals;
      PolicyForward def_fwd;
      if (detection) {
        residuals = batched_defender_obs(env_cfg, envs);
        def_fwd = def_trainer.net.forward(residuals);
      }

      for (int e = 0; e < n_envs; ++e) {
        const Eigen::Index col = static_cast<Eigen::Index>(e) * T + t;
        double logp = 0.0;
        int cls[3];
        for (int h = 0; h < 3; ++h) {
          const Vec p = adv_fwd.head_probs[static_cast<std::size_t>(h)].col(e);
          cls[h] = sample_class(p, act_rng);
          logp += std::log(p[cls[h]]);
          adv_buf.actions(h, col) = cls[h];
        }
        adv_buf.obs.col(col) = obs.col(e);
        adv_buf.logp[col] = logp;
        adv_buf.values[col] = adv_fwd.values[e];
        actions[static_cast<std::size_t>(e)] =
            decode_adversary_action(cls[0], cls[1], cls[2]);

        if (detection) {
          const Vec p = def_fwd.head_probs[0].col(e);
          const int def_cls = sample_class(p, act_rng);
          const Eigen::Index dcol =
              static_cast<Eigen::Index>(e) * n_det +
              det_count[static_cast<std::size_t>(e)];
          def_buf.obs.col(dcol) = residuals.col(e);
          def_buf.actions(0, dcol) = def_cls;
          def_buf.logp[dcol] = std::log(p[def_cls]);
          def_buf.values[dcol] = def_fwd.values[e];
          def_actions[static_cast<std::size_t>(e)] = class_to_label(def_cls);
        } else {
          def_actions[static_cast<std::size_t>(e)].reset();
        }
      }

      parallel_for(n_envs, threads, [&](long e) {
        const auto idx = static_cast<std::size_t>(e);
        const StepOutcome out =
            env_step(env_cfg, envs[idx], actions[idx], def_actions[idx]);
        const Eigen::Index col = static_cast<Eigen::Index>(e) * T + t;
        adv_buf.rewards[col] = out.adversary_reward;
        adv_buf.dones[static_cast<std::size_t>(col)] = out.done ? 1 : 0;
        if (out.detection_step) {
          const Eigen::Index dcol = static_cast<Eigen::Index>(e) * n_det +
                                    det_count[idx];
          def_buf.rewards[dcol] = *out.defender_reward;
        }
      });
      if (detection) {
        for (auto& c : det_count) ++c;
      }
    }
    for (int e = 0; e < n_envs; ++e) {
      def_buf.dones[static_cast<std::size_t>(e + 1) * static_cast<std::size_t>(n_det) - 1] = 1;
    }

    // Per-episode GAE with terminal bootstrap 0.
    adv_buf.advantages.resize(adv_n);
    adv_buf.returns.resize(adv_n);
    def_buf.advantages.resize(def_n);
    def_buf.returns.resize(def_n);
    for (int e = 0; e < n_envs; ++e) {
      Vec a, r;
      std::vector<std::uint8_t> seg_dones(
          adv_buf.dones.begin() + static_cast<long>(e) * T,
          adv_buf.dones.begin() + static_cast<long>(e + 1) * T);
      gae_advantages(adv_buf.rewards.segment(static_cast<Eigen::Index>(e) * T, T),
                     adv_buf.values.segment(static_cast<Eigen::Index>(e) * T, T),
                     seg_dones, cfg.gamma, cfg.gae_lambda, 0.0, a, r);
      adv_buf.advantages.segment(static_cast<Eigen::Index>(e) * T, T) = a;
      adv_buf.returns.segment(static_cast<Eigen::Index>(e) * T, T) = r;

      std::vector<std::uint8_t> dseg_dones(
          def_buf.dones.begin() + static_cast<long>(e) * n_det,
          def_buf.dones.begin() + static_cast<long>(e + 1) * n_det);
      gae_advantages(
          def_buf.rewards.segment(static_cast<Eigen::Index>(e) * n_det, n_det),
          def_buf.values.segment(static_cast<Eigen::Index>(e) * n_det, n_det),
          dseg_dones, cfg.gamma, cfg.gae_lambda, 0.0, a, r);
      def_buf.advantages.segment(static_cast<Eigen::Index>(e) * n_det, n_det) = a;
      def_buf.returns.segment(static_cast<Eigen::Index>(e) * n_det, n_det) = r;
    }

    EpochStats es;
    es.epoch = iter;
    es.adversary_reward = adv_buf.rewards.sum() / static_cast<double>(n_envs);
    es.defender_reward = def_buf.rewards.sum() / static_cast<double>(n_envs);

    Rng adv_update_rng(Rng::derive(seed, (1ULL << 42) + static_cast<std::uint64_t>(iter)));
    Rng def_update_rng(Rng::derive(seed, (1ULL << 43) + static_cast<std::uint64_t>(iter)));
    es.adversary = ppo_update(adv_trainer, adv_buf, cfg, adv_update_rng);
    es.defender = ppo_update(def_trainer, def_buf, cfg, def_update_rng);
    result.history.push_back(es);
  }

  result.adversary = std::move(adv_trainer.net);
  result.defender = std::move(def_trainer.net);
  return result;
}

void save_history_csv(const std::vector<EpochStats>& history,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << "epoch,adversary_mean_reward,defender_mean_reward,"
         "adversary_entropy,defender_entropy,"
         "adversary_clip_fraction,defender_clip_fraction,"
         "adversary_policy_loss,defender_policy_loss,"
         "adversary_value_loss,defender_value_loss\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.adversary_reward) << ','
        << format_double(e.defender_reward) << ','
        << format_double(e.adversary.entropy) << ','
        << format_double(e.defender.entropy) << ','
        << format_double(e.adversary.clip_fraction) << ','
        << format_double(e.defender.clip_fraction) << ','
        << format_double(e.adversary.policy_loss) << ','
        << format_double(e.defender.policy_loss) << ','
        << format_double(e.adversary.value_loss) << ','
        << format_double(e.defender.value_loss) << '\n';
  }
}

}  // namespace fdia
