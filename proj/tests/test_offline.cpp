#include "fdia/offline.hpp"

#include "fdia/attack.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

using namespace fdia;

namespace {

OfflineClassifier zero_classifier(int n_buses, int hidden = 8) {
  OfflineClassifier clf;
  clf.n_buses = n_buses;
  clf.l1 = nn::Linear(hidden, 2 * n_buses);
  clf.l2 = nn::Linear(hidden, hidden);
  clf.head = nn::Linear(n_buses + 1, hidden);
  return clf;
}

std::vector<LabeledWindow> toy_separable_dataset(int rows_per_class, Rng& rng) {
  // N = 1: classes {-1, 0}; features cluster at -1 and +1.
  std::vector<LabeledWindow> rows;
  for (int k = 0; k < rows_per_class; ++k) {
    LabeledWindow neg;
    neg.features = Vec::Constant(2, -1.0) + 0.05 * Vec::Random(2);
    neg.label = -1;
    rows.push_back(neg);
    LabeledWindow pos;
    pos.features = Vec::Constant(2, 1.0) + 0.05 * Vec::Random(2);
    pos.label = 0;
    rows.push_back(pos);
  }
  rng.shuffle(rows);
  return rows;
}

}  // namespace

TEST(ClassIndexConvention, Bijection) {
  for (int label = -1; label < 10; ++label) {
    EXPECT_EQ(class_to_label(label_to_class(label)), label);
  }
  for (int cls = 0; cls <= 10; ++cls) {
    EXPECT_EQ(label_to_class(class_to_label(cls)), cls);
  }
}

TEST(Classify, UniformLogitsTieBreakToNoAttack) {
  const OfflineClassifier clf = zero_classifier(10);
  EXPECT_EQ(classify(clf, Vec::Random(20)), kNoAttack);
}

TEST(Classify, IndexConventionAndShiftInvariance) {
  OfflineClassifier clf = zero_classifier(10);
  clf.head.bias[7] = 3.0;  // output index 7 <-> bus 6
  const Vec feature = Vec::Random(20);
  EXPECT_EQ(classify(clf, feature), 6);
  clf.head.bias.array() += 42.0;
  EXPECT_EQ(classify(clf, feature), 6);
}

TEST(Classify, DimensionMismatchThrows) {
  const OfflineClassifier clf = zero_classifier(10);
  EXPECT_THROW(classify(clf, Vec::Zero(19)), std::invalid_argument);
}

TEST(OfflineDataset, StrataCountsAndLabels) {
  const GridParams p = test::two_bus_params(60);
  const LstmPredictor pred = test::zero_predictor(2, 6);
  OfflineTrainConfig cfg;
  cfg.episodes = 10;
  cfg.ta_set = {0.16, 0.2, 0.4, 0.6, 0.8};
  const auto dataset = generate_fdia_dataset(p, pred, cfg, 99, 2);

  const auto times = detection_times(p.steps, cfg.window);
  const int windows_per_episode = static_cast<int>(times.size());
  ASSERT_GT(windows_per_episode, 0);
  EXPECT_EQ(dataset.size(),
            static_cast<std::size_t>(windows_per_episode) * 10 * cfg.ta_set.size());

  // Group rows by episode and check the attacked-window count per T_a.
  std::map<int, std::pair<double, int>> by_episode;  // ta, attacked count
  for (const auto& row : dataset) {
    EXPECT_GE(row.label, -1);
    EXPECT_LT(row.label, p.n_buses);
    auto& entry = by_episode[row.episode];
    entry.first = row.attack_fraction;
    if (row.label != kNoAttack) entry.second += 1;
  }
  EXPECT_EQ(by_episode.size(), 10 * cfg.ta_set.size());
  for (const auto& [episode, entry] : by_episode) {
    const int expected = std::min(
        windows_per_episode,
        static_cast<int>(std::ceil(entry.first * static_cast<double>(p.steps) /
                                   static_cast<double>(cfg.window))));
    EXPECT_EQ(entry.second, expected);
  }
}

TEST(OfflineDataset, SeededAndThreadInvariant) {
  const GridParams p = test::two_bus_params(60);
  const LstmPredictor pred = test::zero_predictor(2, 6);
  OfflineTrainConfig cfg;
  cfg.episodes = 4;
  const auto a = generate_fdia_dataset(p, pred, cfg, 7, 1);
  const auto b = generate_fdia_dataset(p, pred, cfg, 7, 2);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].label, b[i].label);
    EXPECT_TRUE(a[i].features == b[i].features);
  }
}

TEST(OfflineDataset, RequiresTrainedPredictor) {
  const GridParams p = test::two_bus_params(60);
  LstmPredictor pred = test::zero_predictor(2, 6);
  pred.holdout_rmse = std::numeric_limits<double>::quiet_NaN();
  OfflineTrainConfig cfg;
  EXPECT_THROW(generate_fdia_dataset(p, pred, cfg, 1, 1), ConfigError);
}

TEST(OfflineDataset, CsvRoundTrip) {
  const GridParams p = test::two_bus_params(60);
  const LstmPredictor pred = test::zero_predictor(2, 6);
  OfflineTrainConfig cfg;
  cfg.episodes = 2;
  const auto dataset = generate_fdia_dataset(p, pred, cfg, 21, 1);
  const std::string path =
      (std::filesystem::temp_directory_path() / "fdia_dataset_roundtrip.csv").string();
  save_dataset_csv(dataset, path);
  const auto loaded = load_dataset_csv(path);
  std::remove(path.c_str());
  ASSERT_EQ(loaded.size(), dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    EXPECT_EQ(loaded[i].label, dataset[i].label);
    EXPECT_EQ(loaded[i].episode, dataset[i].episode);
    EXPECT_TRUE(loaded[i].features == dataset[i].features);
  }
}

TEST(OfflineTraining, SeparableToyReachesFullAccuracy) {
  Rng rng(51);
  const auto dataset = toy_separable_dataset(200, rng);
  OfflineTrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 30;
  Rng train_rng(53);
  OfflineTrainReport report;
  const OfflineClassifier clf =
      train_offline_classifier(dataset, cfg, train_rng, &report);
  EXPECT_DOUBLE_EQ(report.holdout_accuracy_pct, 100.0);
  EXPECT_DOUBLE_EQ(clf.holdout_accuracy, 100.0);
}

TEST(OfflineTraining, SeededReproducible) {
  Rng rng(57);
  const auto dataset = toy_separable_dataset(50, rng);
  OfflineTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 5;
  Rng r1(59), r2(59);
  const OfflineClassifier a = train_offline_classifier(dataset, cfg, r1);
  const OfflineClassifier b = train_offline_classifier(dataset, cfg, r2);
  EXPECT_TRUE(a.l1.weight == b.l1.weight);
  EXPECT_TRUE(a.l2.weight == b.l2.weight);
  EXPECT_TRUE(a.head.weight == b.head.weight);
  EXPECT_TRUE(a.head.bias == b.head.bias);
}

TEST(OfflineTraining, DegenerateDatasetsRejected) {
  OfflineTrainConfig cfg;
  Rng rng(61);
  EXPECT_THROW(train_offline_classifier({}, cfg, rng), ConfigError);

  std::vector<LabeledWindow> single;
  for (int i = 0; i < 10; ++i) {
    LabeledWindow row;
    row.features = Vec::Random(2);
    row.label = kNoAttack;
    single.push_back(row);
  }
  EXPECT_THROW(train_offline_classifier(single, cfg, rng), ConfigError);
}
