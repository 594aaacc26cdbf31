#include "fdia/env.hpp"

#include <cmath>

namespace fdia {

void EnvConfig::validate() const {
  if (grid == nullptr) throw ConfigError("env: grid parameters not set");
  if (predictor == nullptr) throw ConfigError("env: predictor not set");
  if (window < 2) throw ConfigError("env: window d must be >= 2");
  if (!(reward_scale > 0.0)) throw ConfigError("env: reward_scale c_s must be > 0");
  if (!(detect_reward > 0.0)) throw ConfigError("env: detect_reward r must be > 0");
  if (!(capture_penalty < 0.0)) throw ConfigError("env: capture_penalty p must be < 0");
  if (!(residual_scale > 0.0)) throw ConfigError("env: residual_scale c_w must be > 0");
  if (predictor->n_buses != grid->n_buses) {
    throw ConfigError("env: predictor was trained for a different bus count");
  }
  if (predictor->window != window) {
    throw ConfigError("env: predictor window does not match env window");
  }
  if (grid->steps < window) throw ConfigError("env: episode shorter than one window");
}

namespace {

std::vector<std::uint8_t> build_detection_mask(const GridParams& grid, int window) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(grid.steps), 0);
  for (const int t : detection_times(grid.steps, window)) {
    mask[static_cast<std::size_t>(t)] = 1;
  }
  return mask;
}

}  // namespace

EpisodeContext reset_from(const EnvConfig& cfg, const SystemState& s0) {
  cfg.validate();
  if (s0.step != 0) throw std::invalid_argument("reset_from: s0.step must be 0");
  EpisodeContext ctx;
  ctx.reference = simulate_reference(*cfg.grid, s0);
  ctx.observed.reserve(static_cast<std::size_t>(cfg.grid->steps) + 1);
  ctx.observed.push_back(s0);
  ctx.record = WindowRecord{kNoAttack, false, 0};
  ctx.detection_mask = build_detection_mask(*cfg.grid, cfg.window);
  ctx.current_step = 0;
  return ctx;
}

EpisodeContext reset(const EnvConfig& cfg, Rng& rng) {
  cfg.validate();
  return reset_from(cfg, sample_initial_state(*cfg.grid, rng, cfg.init_disturbance));
}

Vec adversary_observation(const EnvConfig& cfg, const EpisodeContext& ctx) {
  const SystemState& s = ctx.observed.back();
  Vec obs(cfg.obs_dim());
  obs << s.theta, s.omega,
      static_cast<double>(s.step) / static_cast<double>(cfg.grid->steps);
  return obs;
}

bool is_detection_step(const EpisodeContext& ctx) {
  const int t = ctx.current_step;
  return t < static_cast<int>(ctx.detection_mask.size()) &&
         ctx.detection_mask[static_cast<std::size_t>(t)] != 0;
}

Vec defender_observation(const EnvConfig& cfg, const EpisodeContext& ctx) {
  if (!is_detection_step(ctx)) {
    throw std::invalid_argument("defender_observation: not a detection step");
  }
  const int t = ctx.current_step;
  const int len = cfg.window - 1;
  std::vector<SystemState> history(
      ctx.observed.begin() + (t - len), ctx.observed.begin() + t);
  const Vec predicted = cfg.predictor->predict_next(history);
  return residual(ctx.observed[static_cast<std::size_t>(t)], predicted,
                  cfg.residual_scale);
}

double adv_step_reward(const EnvConfig& cfg, const EpisodeContext& ctx, int t) {
  if (t < 0 || t >= static_cast<int>(ctx.observed.size())) {
    throw std::invalid_argument("adv_step_reward: state index out of range");
  }
  const auto idx = static_cast<std::size_t>(t);
  return cfg.reward_scale *
         (ctx.observed[idx].omega.cwiseAbs() -
          ctx.reference.states[idx].omega.cwiseAbs())
             .sum();
}

int peek_window_label(const EpisodeContext& ctx, const AdversaryAction& action) {
  return window_label(apply_mask(ctx.record, action).record);
}

StepOutcome env_step(const EnvConfig& cfg, EpisodeContext& ctx,
                     const AdversaryAction& action,
                     std::optional<int> defender_action) {
  const int t = ctx.current_step;
  const int T = cfg.grid->steps;
  if (t >= T) throw std::invalid_argument("env_step: episode already finished");
  const bool detection = is_detection_step(ctx);
  if (detection != defender_action.has_value()) {
    throw std::invalid_argument(
        detection ? "env_step: defender action required at a detection step"
                  : "env_step: defender action supplied off the detection schedule");
  }
  if (action.bus < kNoAttack || action.bus >= cfg.grid->n_buses) {
    throw std::invalid_argument("env_step: adversary bus index out of range");
  }
  if (action.droop_value < -1 || action.droop_value > 1) {
    throw std::invalid_argument("env_step: droop replacement must be in {-1, 0, 1}");
  }

  StepOutcome out;
  out.detection_step = detection;
  if (detection) out.defender_obs = defender_observation(cfg, ctx);

  const MaskResult mask = apply_mask(ctx.record, action);
  out.effective_bus = mask.effective_bus;
  const Vec droop = effective_droop(cfg.grid->droop_ref, mask.effective_bus,
                                    static_cast<double>(action.droop_value));

  SystemState next;
  try {
    next = step_rk4(*cfg.grid, ctx.observed.back(), droop);
  } catch (const DivergenceError&) {
    if (!cfg.truncate_on_divergence) throw;
    out.adversary_reward = cfg.divergence_reward;
    out.done = true;
    out.truncated = true;
    out.adversary_obs = adversary_observation(cfg, ctx);
    if (detection) out.defender_reward = 0.0;
    ctx.current_step = T;  // episode unusable from here on
    return out;
  }

  ctx.observed.push_back(next);
  ctx.current_step = t + 1;
  ctx.record = mask.record;

  double reward = adv_step_reward(cfg, ctx, t + 1);
  ctx.pending_rewards.push_back(reward);

  if (detection) {
    const int label = window_label(ctx.record);
    out.window_label = label;
    const int decided = *defender_action;
    out.defender_reward =
        decided == label ? cfg.detect_reward : -cfg.detect_reward;
    out.detection_success = decided == label && label != kNoAttack;
    if (out.detection_success) {
      reward = cfg.capture_penalty;
      ctx.pending_rewards.back() = reward;
    }
    out.window_reward = 0.0;
    for (const double r : ctx.pending_rewards) out.window_reward += r;
    ctx.pending_rewards.clear();
    ctx.record = WindowRecord{kNoAttack, false, t + 1};
  }

  out.adversary_reward = reward;
  out.adversary_obs = adversary_observation(cfg, ctx);
  out.done = (t + 1 == T);
  return out;
}

}  // namespace fdia
