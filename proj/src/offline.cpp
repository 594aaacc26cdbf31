#include "fdia/offline.hpp"

#include "fdia/attack.hpp"
#include "fdia/io.hpp"
#include "fdia/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace fdia {

Mat OfflineClassifier::logits_batch(const Mat& features) const {
  const Mat h1 = nn::tanh_forward(l1.forward(features));
  const Mat h2 = nn::tanh_forward(l2.forward(h1));
  return head.forward(h2);
}

Vec OfflineClassifier::probabilities(const Eigen::Ref<const Vec>& feature) const {
  if (feature.size() != 2 * n_buses) {
    throw std::invalid_argument("classifier: feature length must be 2N");
  }
  return nn::softmax(logits_batch(feature)).col(0);
}

int argmax_class(const Eigen::Ref<const Vec>& scores) {
  int best = 0;
  for (int i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

int classify(const OfflineClassifier& clf, const Eigen::Ref<const Vec>& feature) {
  return class_to_label(argmax_class(clf.probabilities(feature)));
}

namespace {

struct EpisodePlan {
  double ta = 0.0;
  int episode = 0;
  std::uint64_t stream = 0;
};

std::vector<LabeledWindow> generate_episode(const GridParams& params,
                                            const LstmPredictor& predictor,
                                            const OfflineTrainConfig& cfg,
                                            const EpisodePlan& plan,
                                            std::uint64_t seed) {
  Rng rng(Rng::derive(seed, plan.stream));
  const SystemState s0 = sample_initial_state(params, rng, cfg.init_disturbance);

  const std::vector<int> times = detection_times(params.steps, cfg.window);
  const int n_windows = static_cast<int>(times.size());
  const int n_attacked = std::min(
      n_windows, static_cast<int>(std::ceil(
                     plan.ta * static_cast<double>(params.steps) /
                     static_cast<double>(cfg.window))));

  std::vector<int> order(static_cast<std::size_t>(n_windows));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  // Per-window attack assignment: bus and replacement coefficient.
  std::vector<int> attack_bus(static_cast<std::size_t>(n_windows), kNoAttack);
  std::vector<int> attack_c(static_cast<std::size_t>(n_windows), 0);
  for (int k = 0; k < n_attacked; ++k) {
    const auto w = static_cast<std::size_t>(order[static_cast<std::size_t>(k)]);
    attack_bus[w] = static_cast<int>(rng.uniform_int(params.n_buses));
    attack_c[w] = static_cast<int>(rng.uniform_int(3)) - 1;
  }

  // Window w spans the action steps (previous detection time, times[w]].
  const auto window_of_step = [&](int t) {
    int w = 0;
    while (w < n_windows && t > times[static_cast<std::size_t>(w)]) ++w;
    return w;  // n_windows for trailing steps after the last detection
  };

  std::vector<SystemState> states;
  states.reserve(static_cast<std::size_t>(params.steps) + 1);
  states.push_back(s0);
  for (int t = 0; t < params.steps; ++t) {
    const int w = window_of_step(t);
    Vec droop = params.droop_ref;
    if (w < n_windows && attack_bus[static_cast<std::size_t>(w)] != kNoAttack) {
      droop = effective_droop(params.droop_ref,
                              attack_bus[static_cast<std::size_t>(w)],
                              static_cast<double>(attack_c[static_cast<std::size_t>(w)]));
    }
    states.push_back(step_rk4(params, states.back(), droop));
  }

  // Batched residuals at all detection times.
  const int input_len = cfg.window - 1;
  const int dim = 2 * params.n_buses;
  std::vector<Mat> steps(static_cast<std::size_t>(input_len), Mat(dim, n_windows));
  Mat actual(dim, n_windows);
  for (int w = 0; w < n_windows; ++w) {
    const int t = times[static_cast<std::size_t>(w)];
    for (int s = 0; s < input_len; ++s) {
      steps[static_cast<std::size_t>(s)].col(w) =
          pack_state(states[static_cast<std::size_t>(t - input_len + s)]);
    }
    actual.col(w) = pack_state(states[static_cast<std::size_t>(t)]);
  }
  const Mat predicted = predictor.predict_next_batch(steps);
  const Mat residuals = cfg.residual_scale * (actual - predicted);

  std::vector<LabeledWindow> rows;
  rows.reserve(static_cast<std::size_t>(n_windows));
  int window_start = 0;
  for (int w = 0; w < n_windows; ++w) {
    LabeledWindow row;
    row.features = residuals.col(w);
    row.label = attack_bus[static_cast<std::size_t>(w)];
    row.episode = plan.episode;
    row.window_start = window_start;
    row.attack_fraction = plan.ta;
    row.droop_value = attack_c[static_cast<std::size_t>(w)];
    rows.push_back(std::move(row));
    window_start = times[static_cast<std::size_t>(w)] + 1;
  }
  return rows;
}

}  // namespace

std::vector<LabeledWindow> generate_fdia_dataset(const GridParams& params,
                                                 const LstmPredictor& predictor,
                                                 const OfflineTrainConfig& cfg,
                                                 std::uint64_t seed, int threads) {
  if (std::isnan(predictor.holdout_rmse)) {
    throw ConfigError("generate_fdia_dataset: predictor has not been trained");
  }
  if (predictor.n_buses != params.n_buses || predictor.window != cfg.window) {
    throw ConfigError("generate_fdia_dataset: predictor does not match grid/window");
  }
  for (const double ta : cfg.ta_set) {
    if (!(ta > 0.0 && ta <= 1.0)) {
      throw ConfigError("generate_fdia_dataset: every T_a must lie in (0, 1]");
    }
  }
  if (cfg.episodes < 1) throw ConfigError("generate_fdia_dataset: episodes must be >= 1");

  std::vector<EpisodePlan> plans;
  for (std::size_t ti = 0; ti < cfg.ta_set.size(); ++ti) {
    for (int e = 0; e < cfg.episodes; ++e) {
      plans.push_back(EpisodePlan{
          cfg.ta_set[ti], static_cast<int>(plans.size()),
          static_cast<std::uint64_t>(ti) * static_cast<std::uint64_t>(cfg.episodes) +
              static_cast<std::uint64_t>(e)});
    }
  }

  std::vector<std::vector<LabeledWindow>> per_episode(plans.size());
  parallel_for(static_cast<long>(plans.size()), threads, [&](long i) {
    per_episode[static_cast<std::size_t>(i)] = generate_episode(
        params, predictor, cfg, plans[static_cast<std::size_t>(i)], seed);
  });

  std::vector<LabeledWindow> dataset;
  for (auto& rows : per_episode) {
    for (auto& r : rows) dataset.push_back(std::move(r));
  }
  return dataset;
}

OfflineClassifier train_offline_classifier(const std::vector<LabeledWindow>& dataset,
                                           const OfflineTrainConfig& cfg, Rng& rng,
                                           OfflineTrainReport* report) {
  if (dataset.empty()) throw ConfigError("train_offline_classifier: empty dataset");
  std::set<int> labels;
  for (const auto& row : dataset) labels.insert(row.label);
  if (labels.size() < 2) {
    throw ConfigError("train_offline_classifier: dataset has a single class");
  }
  const auto dim = dataset.front().features.size();
  const int n_buses = static_cast<int>(dim) / 2;
  const int n_classes = n_buses + 1;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto holdout = static_cast<std::size_t>(
      cfg.holdout_fraction * static_cast<double>(dataset.size()));
  const std::vector<std::size_t> train_rows(order.begin(),
                                            order.end() - static_cast<long>(holdout));
  const std::vector<std::size_t> hold_rows(order.end() - static_cast<long>(holdout),
                                           order.end());

  OfflineClassifier clf;
  clf.n_buses = n_buses;
  clf.l1 = nn::Linear(cfg.hidden, static_cast<int>(dim));
  clf.l2 = nn::Linear(cfg.hidden, cfg.hidden);
  clf.head = nn::Linear(n_classes, cfg.hidden);
  nn::init_linear(clf.l1, std::sqrt(2.0), rng);
  nn::init_linear(clf.l2, std::sqrt(2.0), rng);
  nn::init_linear(clf.head, 0.01, rng);

  nn::Adam adam(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  adam.add(clf.l1);
  adam.add(clf.l2);
  adam.add(clf.head);

  std::vector<std::size_t> idx = train_rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(idx);
    for (std::size_t lo = 0; lo < idx.size(); lo += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t hi =
          std::min(idx.size(), lo + static_cast<std::size_t>(cfg.minibatch));
      const auto batch = static_cast<Eigen::Index>(hi - lo);
      Mat x(dim, batch);
      std::vector<int> targets(static_cast<std::size_t>(batch));
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& row = dataset[idx[k]];
        x.col(static_cast<Eigen::Index>(k - lo)) = row.features;
        targets[k - lo] = label_to_class(row.label);
      }

      const Mat h1 = nn::tanh_forward(clf.l1.forward(x));
      const Mat h2 = nn::tanh_forward(clf.l2.forward(h1));
      const Mat logits = clf.head.forward(h2);
      Mat dlogits;
      nn::softmax_cross_entropy(logits, targets, &dlogits);

      clf.l1.zero_grad();
      clf.l2.zero_grad();
      clf.head.zero_grad();
      const Mat dh2 = nn::tanh_backward(h2, clf.head.backward(h2, dlogits));
      const Mat dh1 = nn::tanh_backward(h1, clf.l2.backward(h1, dh2));
      clf.l1.backward(x, dh1);
      adam.step();
    }
  }

  // Holdout accuracy, overall and per class.
  const auto& eval_rows = hold_rows.empty() ? train_rows : hold_rows;
  VecI per_total = VecI::Zero(n_classes);
  VecI per_correct = VecI::Zero(n_classes);
  const std::size_t chunk = 1024;
  for (std::size_t lo = 0; lo < eval_rows.size(); lo += chunk) {
    const std::size_t hi = std::min(eval_rows.size(), lo + chunk);
    Mat x(dim, static_cast<Eigen::Index>(hi - lo));
    for (std::size_t k = lo; k < hi; ++k) {
      x.col(static_cast<Eigen::Index>(k - lo)) = dataset[eval_rows[k]].features;
    }
    const Mat logits = clf.logits_batch(x);
    for (std::size_t k = lo; k < hi; ++k) {
      const int truth = label_to_class(dataset[eval_rows[k]].label);
      const int pred = argmax_class(logits.col(static_cast<Eigen::Index>(k - lo)));
      per_total[truth] += 1;
      if (pred == truth) per_correct[truth] += 1;
    }
  }
  const double accuracy = 100.0 * static_cast<double>(per_correct.sum()) /
                          static_cast<double>(per_total.sum());
  clf.holdout_accuracy = accuracy;

  if (report != nullptr) {
    report->holdout_accuracy_pct = accuracy;
    report->per_class_accuracy_pct = Vec::Zero(n_classes);
    for (int cls = 0; cls < n_classes; ++cls) {
      report->per_class_accuracy_pct[cls] =
          per_total[cls] > 0 ? 100.0 * per_correct[cls] / per_total[cls] : 0.0;
    }
    report->per_class_total = per_total;
    report->train_rows = static_cast<long>(train_rows.size());
    report->holdout_rows = static_cast<long>(hold_rows.size());
  }
  return clf;
}

void save_dataset_csv(const std::vector<LabeledWindow>& dataset,
                      const std::string& path) {
  if (dataset.empty()) throw ConfigError("save_dataset_csv: empty dataset");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  const auto dim = dataset.front().features.size();
  out << "episode,window_start,ta,c,label";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",r" << i;
  out << '\n';
  for (const auto& row : dataset) {
    out << row.episode << ',' << row.window_start << ','
        << format_double(row.attack_fraction) << ',' << row.droop_value << ','
        << row.label;
    for (Eigen::Index i = 0; i < dim; ++i) {
      out << ',' << format_double(row.features[i]);
    }
    out << '\n';
  }
}

std::vector<LabeledWindow> load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty dataset file");
  const long dim = std::count(line.begin(), line.end(), ',') - 4;
  if (dim <= 0 || dim % 2 != 0) {
    throw ConfigError(path + ": malformed dataset header");
  }
  std::vector<LabeledWindow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    LabeledWindow row;
    row.features = Vec(dim);
    const auto next = [&]() {
      if (!std::getline(ss, cell, ',')) {
        throw ConfigError(path + ": truncated dataset row");
      }
      return cell;
    };
    row.episode = std::stoi(next());
    row.window_start = std::stoi(next());
    row.attack_fraction = std::stod(next());
    row.droop_value = std::stoi(next());
    row.label = std::stoi(next());
    for (long i = 0; i < dim; ++i) row.features[i] = std::stod(next());
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_classifier(const OfflineClassifier& clf, const std::string& path) {
  Json j;
  j["kind"] = "offline_classifier";
  j["n_buses"] = clf.n_buses;
  j["hidden"] = clf.l1.out_size();
  j["l1_weight"] = mat_to_json(clf.l1.weight);
  j["l1_bias"] = vec_to_json(clf.l1.bias);
  j["l2_weight"] = mat_to_json(clf.l2.weight);
  j["l2_bias"] = vec_to_json(clf.l2.bias);
  j["head_weight"] = mat_to_json(clf.head.weight);
  j["head_bias"] = vec_to_json(clf.head.bias);
  j["holdout_accuracy"] = clf.holdout_accuracy;
  save_json_file(j, path);
}

OfflineClassifier load_classifier(const std::string& path) {
  const Json j = load_json_file(path);
  if (j.value("kind", "") != "offline_classifier") {
    throw ConfigError(path + " is not an offline_classifier artifact");
  }
  OfflineClassifier clf;
  clf.n_buses = j.at("n_buses").get<int>();
  const int hidden = j.at("hidden").get<int>();
  const int dim = 2 * clf.n_buses;
  clf.l1 = nn::Linear(hidden, dim);
  clf.l2 = nn::Linear(hidden, hidden);
  clf.head = nn::Linear(clf.n_buses + 1, hidden);
  clf.l1.weight = mat_from_json(j.at("l1_weight"), "l1_weight");
  clf.l1.bias = vec_from_json(j.at("l1_bias"), "l1_bias");
  clf.l2.weight = mat_from_json(j.at("l2_weight"), "l2_weight");
  clf.l2.bias = vec_from_json(j.at("l2_bias"), "l2_bias");
  clf.head.weight = mat_from_json(j.at("head_weight"), "head_weight");
  clf.head.bias = vec_from_json(j.at("head_bias"), "head_bias");
  clf.holdout_accuracy =
      j.value("holdout_accuracy", std::numeric_limits<double>::quiet_NaN());
  if (clf.l1.weight.rows() != hidden || clf.l1.weight.cols() != dim ||
      clf.l2.weight.rows() != hidden || clf.l2.weight.cols() != hidden ||
      clf.head.weight.rows() != clf.n_buses + 1 ||
      clf.head.weight.cols() != hidden) {
    throw ConfigError(path + ": classifier weight shapes are inconsistent");
  }
  return clf;
}

}  // namespace fdia
