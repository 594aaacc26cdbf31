#pragma once

#include "fdia/attack.hpp"
#include "fdia/grid.hpp"
#include "fdia/predictor.hpp"
#include "fdia/rng.hpp"

#include <optional>
#include <vector>

namespace fdia {

struct EnvConfig {
  int window = 6;                  // d
  double reward_scale = 0.1;       // c_s
  double detect_reward = 0.1;      // r
  double capture_penalty = -0.1;   // p
  double residual_scale = 100.0;   // c_w
  double init_disturbance = 0.2;
  // Divergence policy: throw by default; optionally truncate the episode
  // with a clamped adversary reward (for unstable user-supplied grids).
  bool truncate_on_divergence = false;
  double divergence_reward = -10.0;
  const GridParams* grid = nullptr;
  const LstmPredictor* predictor = nullptr;

  void validate() const;
  int obs_dim() const { return 2 * grid->n_buses + 1; }
};

// Everything one episode owns: the observed (possibly attacked) trajectory,
// the precomputed reference trajectory, window bookkeeping, and the pending
// in-window adversary rewards.
struct EpisodeContext {
  std::vector<SystemState> observed;  // observed[t].step == t
  Trajectory reference;
  WindowRecord record;
  std::vector<double> pending_rewards;
  std::vector<std::uint8_t> detection_mask;  // size T
  int current_step = 0;
};

struct StepOutcome {
  Vec adversary_obs;                 // [theta; omega; t/T] after the step
  std::optional<Vec> defender_obs;   // residual, present iff detection step
  double adversary_reward = 0.0;
  std::optional<double> defender_reward;
  bool done = false;
  // Diagnostics.
  bool detection_step = false;
  int window_label = kNoAttack;
  int effective_bus = kNoAttack;
  bool detection_success = false;    // D^suc
  double window_reward = 0.0;        // sum of adversary rewards over the closed window
  bool truncated = false;
};

EpisodeContext reset(const EnvConfig& cfg, Rng& rng);
// Reset from a caller-supplied initial state (tests, forced equilibrium).
EpisodeContext reset_from(const EnvConfig& cfg, const SystemState& s0);

Vec adversary_observation(const EnvConfig& cfg, const EpisodeContext& ctx);

bool is_detection_step(const EpisodeContext& ctx);

// Residual s^e for the current state; valid only at detection steps, where
// the d-1 preceding observed states feed the predictor.
Vec defender_observation(const EnvConfig& cfg, const EpisodeContext& ctx);

// c_s * sum_i (|omega_{i,t}| - |omega^ref_{i,t}|) at state index t.
double adv_step_reward(const EnvConfig& cfg, const EpisodeContext& ctx, int t);

// Label the window would get if `action` were applied at the current
// (detection) step; pure peek used by oracle defenders.
int peek_window_label(const EpisodeContext& ctx, const AdversaryAction& action);

// Advances one step: mask, droop substitution, RK4, rewards, and — at
// detection times — residual, window label, defender reward, capture
// penalty, and window-record reset. defender_action must be present exactly
// at detection steps. The step's adversary reward reads the post-step state.
StepOutcome env_step(const EnvConfig& cfg, EpisodeContext& ctx,
                     const AdversaryAction& action,
                     std::optional<int> defender_action);

}  // namespace fdia
