#pragma once

#include "fdia/grid.hpp"
#include "fdia/nn.hpp"
#include "fdia/predictor.hpp"
#include "fdia/rng.hpp"

#include <limits>
#include <string>
#include <vector>

namespace fdia {

// One detection window turned into a training row: the residual at the
// window's detection time plus the ground-truth label and provenance.
struct LabeledWindow {
  Vec features;
  int label = kNoAttack;  // -1..N-1
  int episode = 0;
  int window_start = 0;
  double attack_fraction = 0.0;  // T_a used for the generating episode
  int droop_value = 0;           // c used (meaningful when label != -1)
};

struct OfflineTrainConfig {
  std::vector<double> ta_set{0.16, 0.2, 0.4, 0.6, 0.8};
  int episodes = 100;  // per T_a value
  int window = 6;
  double residual_scale = 100.0;
  double init_disturbance = 0.2;
  int hidden = 256;
  int epochs = 50;
  int minibatch = 128;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
};

// Class index convention: output 0 <-> label -1, output i+1 <-> bus i.
inline int label_to_class(int label) { return label + 1; }
inline int class_to_label(int cls) { return cls - 1; }

// Residual -> bus multiclass MLP: 2N -> 256 -> 256 -> N+1, tanh trunk.
struct OfflineClassifier {
  int n_buses = 0;
  nn::Linear l1, l2, head;
  double holdout_accuracy = std::numeric_limits<double>::quiet_NaN();  // percent

  Mat logits_batch(const Mat& features) const;
  Vec probabilities(const Eigen::Ref<const Vec>& feature) const;
};

// Argmax over class probabilities mapped back to a label; ties break toward
// the smallest class index.
int classify(const OfflineClassifier& clf, const Eigen::Ref<const Vec>& feature);
int argmax_class(const Eigen::Ref<const Vec>& scores);

// Synthetic FDIA corpus per the T_a scheme: one simulated episode per
// (episode, T_a) pair, ceil(T_a * T / d) windows attacked at a uniformly
// chosen bus with a uniformly chosen c, attacks covering every step of the
// attacked window.
std::vector<LabeledWindow> generate_fdia_dataset(const GridParams& params,
                                                 const LstmPredictor& predictor,
                                                 const OfflineTrainConfig& cfg,
                                                 std::uint64_t seed, int threads);

struct OfflineTrainReport {
  double holdout_accuracy_pct = 0.0;
  Vec per_class_accuracy_pct;  // N+1 entries, class order
  VecI per_class_total;
  long train_rows = 0;
  long holdout_rows = 0;
};

OfflineClassifier train_offline_classifier(const std::vector<LabeledWindow>& dataset,
                                           const OfflineTrainConfig& cfg, Rng& rng,
                                           OfflineTrainReport* report = nullptr);

void save_dataset_csv(const std::vector<LabeledWindow>& dataset,
                      const std::string& path);
std::vector<LabeledWindow> load_dataset_csv(const std::string& path);

void save_classifier(const OfflineClassifier& clf, const std::string& path);
OfflineClassifier load_classifier(const std::string& path);

}  // namespace fdia
