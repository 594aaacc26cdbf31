#include "fdia/predictor.hpp"

#include "fdia/attack.hpp"
#include "fdia/io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>

using namespace fdia;

namespace {

std::vector<SystemState> constant_history(const Vec& theta, const Vec& omega, int len) {
  std::vector<SystemState> h;
  for (int i = 0; i < len; ++i) h.push_back(SystemState{theta, omega, i});
  return h;
}

}  // namespace

TEST(Predictor, ZeroWeightsPredictDenormalizedBias) {
  LstmPredictor pred = test::zero_predictor(2, 6);
  pred.head.bias = (Vec(4) << 1.0, 2.0, 3.0, 4.0).finished();
  pred.norm_mean = (Vec(4) << 0.5, 0.5, 0.0, 0.0).finished();
  pred.norm_scale = (Vec(4) << 2.0, 2.0, 1.0, 1.0).finished();

  Rng rng(3);
  Vec theta(2), omega(2);
  for (int i = 0; i < 2; ++i) {
    theta[i] = rng.uniform(-1.0, 1.0);
    omega[i] = rng.uniform(-1.0, 1.0);
  }
  // With zero gates the LSTM state stays zero, so the output is the bias.
  const Vec out = pred.predict_next(constant_history(theta, omega, 5));
  const Vec expected =
      (pred.head.bias.array() * pred.norm_scale.array()) + pred.norm_mean.array();
  EXPECT_LT((out - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Predictor, HistoryLengthContract) {
  const LstmPredictor pred = test::zero_predictor(2, 6);
  EXPECT_THROW(pred.predict_next(constant_history(Vec::Zero(2), Vec::Zero(2), 4)),
               std::invalid_argument);
  EXPECT_THROW(pred.predict_next(constant_history(Vec::Zero(2), Vec::Zero(2), 6)),
               std::invalid_argument);
}

TEST(Predictor, DeterministicInference) {
  const GridParams p = test::two_bus_params();
  Rng rng(5);
  const Trajectory traj = simulate_reference(p, sample_initial_state(p, rng, 0.2));
  Rng train_rng(7);
  PredictorTrainConfig cfg;
  cfg.hidden = 8;
  cfg.episodes = 1;
  cfg.epochs = 2;
  cfg.windows_per_episode = 10;
  const LstmPredictor pred = train_predictor({traj}, cfg, train_rng);
  const std::vector<SystemState> h(traj.states.begin(), traj.states.begin() + 5);
  const Vec a = pred.predict_next(h);
  const Vec b = pred.predict_next(h);
  EXPECT_TRUE(a == b);
}

TEST(Residual, ScaledDifference) {
  SystemState s{(Vec(2) << 0.1, 0.2).finished(), (Vec(2) << 0.0, 0.0).finished(), 0};
  const Vec match = pack_state(s);
  EXPECT_EQ(residual(s, match, 100.0).cwiseAbs().maxCoeff(), 0.0);

  Vec off = match;
  off[1] -= 0.01;
  const Residual r = residual(s, off, 100.0);
  EXPECT_NEAR(r[1], 1.0, 1e-12);
  EXPECT_EQ(r[0], 0.0);

  const Residual r1 = residual(s, off, 1.0);
  EXPECT_LT((r - 100.0 * r1).cwiseAbs().maxCoeff(), 1e-12);

  EXPECT_THROW(residual(s, Vec::Zero(3), 100.0), std::invalid_argument);
}

TEST(Predictor, LearnsConstantTrajectories) {
  // Equilibrium episodes are constant sequences; the held-out RMSE must
  // collapse after the default schedule.
  const GridParams p = test::two_bus_params(40);
  std::vector<Trajectory> corpus;
  for (int e = 0; e < 10; ++e) {
    corpus.push_back(simulate_reference(p, p.equilibrium_state()));
  }
  PredictorTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 10;
  cfg.windows_per_episode = 10;
  Rng rng(11);
  const LstmPredictor pred = train_predictor(corpus, cfg, rng);
  EXPECT_LT(pred.holdout_rmse, 1e-3);
}

TEST(Predictor, TrainingLossNonIncreasing) {
  const GridParams p = test::two_bus_params(60);
  std::vector<Trajectory> corpus;
  Rng sim_rng(13);
  for (int e = 0; e < 8; ++e) {
    corpus.push_back(simulate_reference(p, sample_initial_state(p, sim_rng, 0.2)));
  }
  PredictorTrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 12;
  cfg.windows_per_episode = 20;
  cfg.learning_rate = 1e-4;  // small enough for steady descent
  Rng rng(17);
  std::vector<double> losses;
  train_predictor(corpus, cfg, rng, &losses);
  ASSERT_EQ(losses.size(), 12u);
  // Smoothed curve (window of 3) must not increase beyond tolerance.
  std::vector<double> smooth;
  for (std::size_t i = 2; i < losses.size(); ++i) {
    smooth.push_back((losses[i - 2] + losses[i - 1] + losses[i]) / 3.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    EXPECT_LE(smooth[i], smooth[i - 1] + 1e-6);
  }
}

TEST(Predictor, SeededTrainingIsReproducible) {
  const GridParams p = test::two_bus_params(60);
  std::vector<Trajectory> corpus;
  Rng sim_rng(19);
  for (int e = 0; e < 5; ++e) {
    corpus.push_back(simulate_reference(p, sample_initial_state(p, sim_rng, 0.2)));
  }
  PredictorTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 3;
  cfg.windows_per_episode = 10;
  Rng r1(23), r2(23);
  const LstmPredictor a = train_predictor(corpus, cfg, r1);
  const LstmPredictor b = train_predictor(corpus, cfg, r2);
  EXPECT_TRUE(a.cell.w_input == b.cell.w_input);
  EXPECT_TRUE(a.cell.w_hidden == b.cell.w_hidden);
  EXPECT_TRUE(a.cell.bias == b.cell.bias);
  EXPECT_TRUE(a.head.weight == b.head.weight);
  EXPECT_TRUE(a.head.bias == b.head.bias);
  EXPECT_EQ(a.holdout_rmse, b.holdout_rmse);
}

TEST(Predictor, SaveLoadRoundTrip) {
  const GridParams p = test::two_bus_params(60);
  Rng sim_rng(29);
  std::vector<Trajectory> corpus{
      simulate_reference(p, sample_initial_state(p, sim_rng, 0.2)),
      simulate_reference(p, sample_initial_state(p, sim_rng, 0.2))};
  PredictorTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 2;
  cfg.windows_per_episode = 8;
  Rng rng(31);
  const LstmPredictor a = train_predictor(corpus, cfg, rng);

  const std::string path =
      (std::filesystem::temp_directory_path() / "fdia_pred_roundtrip.json").string();
  save_predictor(a, path);
  const LstmPredictor b = load_predictor(path);
  std::remove(path.c_str());

  const std::vector<SystemState> h(corpus[0].states.begin(),
                                   corpus[0].states.begin() + 5);
  EXPECT_TRUE(a.predict_next(h) == b.predict_next(h));
  EXPECT_EQ(a.holdout_rmse, b.holdout_rmse);
}

TEST(Predictor, EmptyCorpusRejected) {
  PredictorTrainConfig cfg;
  Rng rng(37);
  EXPECT_THROW(train_predictor({}, cfg, rng), ConfigError);
}

TEST(Predictor, BenignResidualsSmallerThanAttacked) {
  // Separation on the two-bus grid: residual magnitude under a c = -1
  // attack exceeds the benign residual on matched fresh episodes.
  const GridParams p = test::two_bus_params();
  std::vector<Trajectory> corpus;
  for (int e = 0; e < 40; ++e) {
    Rng rng(Rng::derive(41, static_cast<std::uint64_t>(e)));
    corpus.push_back(simulate_reference(p, sample_initial_state(p, rng, 0.2)));
  }
  PredictorTrainConfig cfg;
  cfg.hidden = 32;
  cfg.epochs = 25;
  cfg.windows_per_episode = 60;
  Rng rng(43);
  const LstmPredictor pred = train_predictor(corpus, cfg, rng);

  double benign_sum = 0.0;
  double attacked_sum = 0.0;
  int count = 0;
  for (int e = 0; e < 5; ++e) {
    Rng erng(Rng::derive(47, static_cast<std::uint64_t>(e)));
    const SystemState s0 = sample_initial_state(p, erng, 0.2);
    Trajectory benign = simulate_reference(p, s0);
    // Attacked run: bus 0 droop pinned to -1 throughout.
    const Vec attacked_droop = effective_droop(p.droop_ref, 0, -1.0);
    Trajectory attacked;
    attacked.states.push_back(s0);
    for (int t = 0; t < p.steps; ++t) {
      attacked.states.push_back(step_rk4(p, attacked.states.back(), attacked_droop));
    }
    for (int t = 5; t <= p.steps; ++t) {
      const std::vector<SystemState> hb(benign.states.begin() + (t - 5),
                                        benign.states.begin() + t);
      const std::vector<SystemState> ha(attacked.states.begin() + (t - 5),
                                        attacked.states.begin() + t);
      benign_sum += residual(benign.states[static_cast<std::size_t>(t)],
                             pred.predict_next(hb), 100.0)
                        .cwiseAbs()
                        .maxCoeff();
      attacked_sum += residual(attacked.states[static_cast<std::size_t>(t)],
                               pred.predict_next(ha), 100.0)
                          .cwiseAbs()
                          .maxCoeff();
      ++count;
    }
  }
  // Benign magnitude statistics sit strictly below the attacked ones.
  EXPECT_LT(benign_sum / count, attacked_sum / count);
}
