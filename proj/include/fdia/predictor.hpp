#pragma once

#include "fdia/grid.hpp"
#include "fdia/nn.hpp"
#include "fdia/rng.hpp"

#include <limits>
#include <string>
#include <vector>

namespace fdia {

// Scaled prediction error s^e = c_w (s - s_hat), length 2N.
using Residual = Vec;

Vec pack_state(const SystemState& s);  // [theta; omega]

Residual residual(const SystemState& s, const Eigen::Ref<const Vec>& predicted,
                  double scale);

struct PredictorTrainConfig {
  int hidden = 100;
  int window = 6;  // d; the input sequence has length d-1
  int episodes = 500;
  int windows_per_episode = 40;
  int epochs = 30;
  int minibatch = 128;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
};

// One-step state predictor: [s_{t-(d-1)}, ..., s_{t-1}] -> s_t.
// Single LSTM layer plus an affine head, with per-dimension z-score
// normalization baked in so inference is self-contained.
struct LstmPredictor {
  int n_buses = 0;
  int window = 6;
  nn::LstmCell cell;  // input 2N
  nn::Linear head;    // hidden -> 2N
  Vec norm_mean;      // 2N
  Vec norm_scale;     // 2N, strictly positive
  double holdout_rmse = std::numeric_limits<double>::quiet_NaN();

  int state_dim() const { return 2 * n_buses; }

  // history.size() must be exactly window-1.
  Vec predict_next(const std::vector<SystemState>& history) const;
  // steps.size() == window-1; each entry is 2N x batch, one sample per
  // column. Returns the de-normalized predictions, 2N x batch.
  Mat predict_next_batch(const std::vector<Mat>& steps) const;
};

// Reference episodes from random initial states under unaltered droop.
std::vector<Trajectory> simulate_benign_corpus(const GridParams& params,
                                               int episodes, double disturbance,
                                               std::uint64_t seed, int threads);

// Minimizes one-step MSE over sliding windows with Adam. The holdout RMSE
// (raw state units) is measured on held-out episodes and stored on the
// model. epoch_loss, when given, receives the mean training loss per epoch.
LstmPredictor train_predictor(const std::vector<Trajectory>& benign,
                              const PredictorTrainConfig& cfg, Rng& rng,
                              std::vector<double>* epoch_loss = nullptr);

void save_predictor(const LstmPredictor& p, const std::string& path);
LstmPredictor load_predictor(const std::string& path);

}  // namespace fdia
