#include "fdia/env.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace fdia;

namespace {

struct EnvFixture {
  GridParams grid;
  LstmPredictor predictor;
  EnvConfig cfg;

  explicit EnvFixture(int steps = 60) {
    grid = fdia::test::two_bus_params(steps);
    predictor = fdia::test::zero_predictor(2, 6);
    cfg.grid = &grid;
    cfg.predictor = &predictor;
  }
};

}  // namespace

TEST(Env, ResetShapesAndDeterminism) {
  EnvFixture f;
  Rng r1(5), r2(5);
  const EpisodeContext a = reset(f.cfg, r1);
  const EpisodeContext b = reset(f.cfg, r2);
  EXPECT_EQ(adversary_observation(f.cfg, a).size(), 2 * f.grid.n_buses + 1);
  EXPECT_EQ(adversary_observation(f.cfg, a)[2 * f.grid.n_buses], 0.0);
  EXPECT_TRUE(a.observed[0].theta == b.observed[0].theta);
  EXPECT_TRUE(a.observed[0].omega == b.observed[0].omega);
  EXPECT_EQ(a.record.recorded_bus, kNoAttack);
}

TEST(Env, EquilibriumForcedResetHasZeroReference) {
  EnvFixture f;
  f.cfg.init_disturbance = 0.0;
  Rng rng(7);
  const EpisodeContext ctx = reset(f.cfg, rng);
  for (const auto& s : ctx.reference.states) {
    EXPECT_EQ(s.omega.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Env, ObservationLengthMatchesPaperExample) {
  // N = 10 grid: adversary observation is 21 wide.
  GridParams grid = load_grid_config(fdia::test::default_config_path());
  LstmPredictor predictor = fdia::test::zero_predictor(10, 6);
  EnvConfig cfg;
  cfg.grid = &grid;
  cfg.predictor = &predictor;
  Rng rng(9);
  const EpisodeContext ctx = reset(cfg, rng);
  EXPECT_EQ(adversary_observation(cfg, ctx).size(), 21);
}

TEST(Env, DefenderActionContract) {
  EnvFixture f;
  Rng rng(11);
  EpisodeContext ctx = reset(f.cfg, rng);
  // Step 0 is not a detection step: supplying an action is an error.
  EXPECT_THROW(env_step(f.cfg, ctx, AdversaryAction{}, 0), std::invalid_argument);
  for (int t = 0; t < 6; ++t) {
    if (is_detection_step(ctx)) {
      // Missing action at a detection step is an error.
      EXPECT_THROW(env_step(f.cfg, ctx, AdversaryAction{}, std::nullopt),
                   std::invalid_argument);
      env_step(f.cfg, ctx, AdversaryAction{}, kNoAttack);
    } else {
      env_step(f.cfg, ctx, AdversaryAction{}, std::nullopt);
    }
  }
}

TEST(Env, RewardArithmeticCaptureCase) {
  // Time-invariant attack on bus 1; correct detection at t = 6 pays the
  // defender +r and replaces the adversary reward with p.
  EnvFixture f;
  Rng rng(13);
  EpisodeContext ctx = reset(f.cfg, rng);
  for (int t = 0; t < 7; ++t) {
    const AdversaryAction attack{1, -1, false};
    std::optional<int> def;
    if (is_detection_step(ctx)) def = 1;
    const StepOutcome out = env_step(f.cfg, ctx, attack, def);
    if (t < 6) {
      EXPECT_FALSE(out.detection_step);
      EXPECT_FALSE(out.defender_reward.has_value());
    } else {
      EXPECT_TRUE(out.detection_step);
      EXPECT_EQ(out.window_label, 1);
      EXPECT_DOUBLE_EQ(*out.defender_reward, 0.1);
      EXPECT_DOUBLE_EQ(out.adversary_reward, -0.1);
      EXPECT_TRUE(out.detection_success);
    }
  }
}

TEST(Env, RewardArithmeticBenignAgreement) {
  // No attack anywhere, defender answers -1: +r for the defender and the
  // adversary keeps its deviation reward, exactly zero on a benign run.
  EnvFixture f;
  Rng rng(17);
  EpisodeContext ctx = reset(f.cfg, rng);
  for (int t = 0; t < 7; ++t) {
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;
    const StepOutcome out = env_step(f.cfg, ctx, AdversaryAction{}, def);
    EXPECT_EQ(out.adversary_reward, 0.0);
    if (out.detection_step) {
      EXPECT_EQ(out.window_label, kNoAttack);
      EXPECT_DOUBLE_EQ(*out.defender_reward, 0.1);
      EXPECT_FALSE(out.detection_success);
    }
  }
}

TEST(Env, NoAttackEpisodeRewardIsExactlyZero) {
  EnvFixture f;
  Rng rng(19);
  EpisodeContext ctx = reset(f.cfg, rng);
  double cumulative = 0.0;
  bool done = false;
  while (!done) {
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;
    const StepOutcome out = env_step(f.cfg, ctx, AdversaryAction{}, def);
    EXPECT_EQ(out.adversary_reward, 0.0);
    cumulative += out.adversary_reward;
    done = out.done;
  }
  EXPECT_EQ(cumulative, 0.0);
  EXPECT_EQ(ctx.current_step, f.grid.steps);
}

TEST(Env, AttackRaisesDeviation) {
  // A persistent c = -1 attack accumulates positive deviation reward.
  EnvFixture f(100);
  Rng rng(23);
  EpisodeContext ctx = reset(f.cfg, rng);
  double cumulative = 0.0;
  bool done = false;
  while (!done) {
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;  // defender never captures
    const StepOutcome out = env_step(f.cfg, ctx, AdversaryAction{0, -1, false}, def);
    cumulative += out.adversary_reward;
    done = out.done;
  }
  EXPECT_GT(cumulative, 0.0);
}

TEST(Env, CaptureConsistencyProperty) {
  // D^suc == (decision == label && label != -1); on capture the adversary
  // reward equals p exactly; the record resets after every detection.
  EnvFixture f(120);
  Rng rng(29);
  Rng actions(31);
  EpisodeContext ctx = reset(f.cfg, rng);
  double defender_total = 0.0;
  int detections = 0;
  bool done = false;
  while (!done) {
    const AdversaryAction a{static_cast<int>(actions.uniform_int(3)) - 1,
                            static_cast<int>(actions.uniform_int(3)) - 1,
                            actions.uniform_int(2) == 1};
    std::optional<int> def;
    if (is_detection_step(ctx)) {
      def = static_cast<int>(actions.uniform_int(3)) - 1;
    }
    const StepOutcome out = env_step(f.cfg, ctx, a, def);
    if (out.detection_step) {
      ++detections;
      defender_total += *out.defender_reward;
      EXPECT_EQ(out.detection_success,
                *def == out.window_label && out.window_label != kNoAttack);
      if (out.detection_success) {
        EXPECT_DOUBLE_EQ(out.adversary_reward, f.cfg.capture_penalty);
      }
      EXPECT_EQ(ctx.record.recorded_bus, kNoAttack);
      EXPECT_FALSE(ctx.record.attacked_any_step);
    }
    done = out.done;
  }
  EXPECT_GT(detections, 0);
  EXPECT_LE(defender_total, f.cfg.detect_reward * detections + 1e-12);
  EXPECT_GE(defender_total, -f.cfg.detect_reward * detections - 1e-12);
}

TEST(Env, WindowRewardSumsPendingRewards) {
  EnvFixture f;
  Rng rng(37);
  EpisodeContext ctx = reset(f.cfg, rng);
  double pending = 0.0;
  for (int t = 0; t < 13; ++t) {
    const AdversaryAction a{0, -1, false};
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;  // no capture
    const StepOutcome out = env_step(f.cfg, ctx, a, def);
    pending += out.adversary_reward;
    if (out.detection_step) {
      EXPECT_NEAR(out.window_reward, pending, 1e-15);
      pending = 0.0;
    }
  }
}

TEST(Env, AdvStepRewardMatchesDefinition) {
  // r^w at state index t is c_s * sum_i (|w_i,t| - |w^ref_i,t|).
  EnvFixture f;
  Rng rng(41);
  EpisodeContext ctx = reset(f.cfg, rng);
  for (int t = 0; t < 10; ++t) {
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;
    env_step(f.cfg, ctx, AdversaryAction{1, 0, false}, def);
  }
  const int t = 8;
  const double expected =
      f.cfg.reward_scale *
      (ctx.observed[t].omega.cwiseAbs() -
       ctx.reference.states[t].omega.cwiseAbs())
          .sum();
  EXPECT_DOUBLE_EQ(adv_step_reward(f.cfg, ctx, t), expected);
  EXPECT_THROW(adv_step_reward(f.cfg, ctx, 99), std::invalid_argument);
}

TEST(Env, ScaledDeviationArithmetic) {
  // Uniform extra |omega| of 0.1 on all 10 buses with c_s = 0.1 -> 0.1.
  GridParams grid = load_grid_config(fdia::test::default_config_path());
  LstmPredictor predictor = fdia::test::zero_predictor(10, 6);
  EnvConfig cfg;
  cfg.grid = &grid;
  cfg.predictor = &predictor;
  EpisodeContext ctx = reset_from(cfg, grid.equilibrium_state());
  // Forge an observed state with omega = ref + 0.1 at index 1.
  ctx.observed.push_back(ctx.reference.states[1]);
  ctx.observed.back().omega.array() += 0.1;
  ctx.current_step = 1;
  EXPECT_NEAR(adv_step_reward(cfg, ctx, 1), 0.1, 1e-12);
}

TEST(Env, EnvConfigValidation) {
  EnvFixture f;
  EnvConfig bad = f.cfg;
  bad.detect_reward = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.capture_penalty = 0.1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.window = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = f.cfg;
  bad.predictor = nullptr;
  EXPECT_THROW(bad.validate(), ConfigError);
  LstmPredictor wrong = fdia::test::zero_predictor(3, 6);
  bad = f.cfg;
  bad.predictor = &wrong;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Env, EquilibriumEpisodeStaysPinned) {
  // Full default-grid episode from the exact equilibrium: ||omega||_inf
  // stays below 1e-9 (it is exactly zero by construction).
  GridParams grid = load_grid_config(fdia::test::default_config_path());
  LstmPredictor predictor = fdia::test::zero_predictor(10, 6);
  EnvConfig cfg;
  cfg.grid = &grid;
  cfg.predictor = &predictor;
  EpisodeContext ctx = reset_from(cfg, grid.equilibrium_state());
  bool done = false;
  while (!done) {
    std::optional<int> def;
    if (is_detection_step(ctx)) def = kNoAttack;
    done = env_step(cfg, ctx, AdversaryAction{}, def).done;
  }
  for (const auto& s : ctx.observed) {
    EXPECT_LT(s.omega.cwiseAbs().maxCoeff(), 1e-9);
  }
}
