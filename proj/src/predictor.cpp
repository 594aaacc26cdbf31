#include "fdia/predictor.hpp"

#include "fdia/io.hpp"
#include "fdia/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fdia {

Vec pack_state(const SystemState& s) {
  Vec v(s.theta.size() + s.omega.size());
  v << s.theta, s.omega;
  return v;
}

Residual residual(const SystemState& s, const Eigen::Ref<const Vec>& predicted,
                  double scale) {
  const Vec packed = pack_state(s);
  if (packed.size() != predicted.size()) {
    throw std::invalid_argument("residual: dimension mismatch");
  }
  return scale * (packed - predicted);
}

Vec LstmPredictor::predict_next(const std::vector<SystemState>& history) const {
  if (static_cast<int>(history.size()) != window - 1) {
    throw std::invalid_argument("predict_next: history must have length d-1 = " +
                                std::to_string(window - 1));
  }
  std::vector<Mat> steps;
  steps.reserve(history.size());
  for (const auto& s : history) {
    Vec packed = pack_state(s);
    if (packed.size() != state_dim()) {
      throw std::invalid_argument("predict_next: state dimension mismatch");
    }
    steps.emplace_back(std::move(packed));
  }
  return predict_next_batch(steps).col(0);
}

Mat LstmPredictor::predict_next_batch(const std::vector<Mat>& steps) const {
  if (static_cast<int>(steps.size()) != window - 1) {
    throw std::invalid_argument("predict_next_batch: need d-1 input steps");
  }
  const auto batch = steps.front().cols();
  const int H = cell.hidden_size();
  Mat h = Mat::Zero(H, batch);
  Mat c = Mat::Zero(H, batch);
  const Vec inv_scale = norm_scale.cwiseInverse();
  Mat h_next, c_next;
  for (const Mat& raw : steps) {
    const Mat x = (raw.colwise() - norm_mean).array().colwise() * inv_scale.array();
    cell.forward(x, h, c, h_next, c_next, nullptr);
    h.swap(h_next);
    c.swap(c_next);
  }
  Mat out = head.forward(h);
  return (out.array().colwise() * norm_scale.array()).colwise() + norm_mean.array();
}

std::vector<Trajectory> simulate_benign_corpus(const GridParams& params,
                                               int episodes, double disturbance,
                                               std::uint64_t seed, int threads) {
  std::vector<Trajectory> out(static_cast<std::size_t>(episodes));
  parallel_for(episodes, threads, [&](long e) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(e)));
    const SystemState s0 = sample_initial_state(params, rng, disturbance);
    out[static_cast<std::size_t>(e)] = simulate_reference(params, s0);
  });
  return out;
}

namespace {

struct WindowRef {
  int episode;
  int target;  // predict states[target] from the window-1 states before it
};

Mat gather_targets(const std::vector<Trajectory>& trajs,
                   const std::vector<WindowRef>& refs,
                   const std::vector<std::size_t>& idx, std::size_t lo,
                   std::size_t hi) {
  const auto dim = pack_state(trajs.front().states.front()).size();
  Mat out(dim, static_cast<Eigen::Index>(hi - lo));
  for (std::size_t k = lo; k < hi; ++k) {
    const auto& r = refs[idx[k]];
    out.col(static_cast<Eigen::Index>(k - lo)) =
        pack_state(trajs[static_cast<std::size_t>(r.episode)]
                       .states[static_cast<std::size_t>(r.target)]);
  }
  return out;
}

std::vector<Mat> gather_inputs(const std::vector<Trajectory>& trajs,
                               const std::vector<WindowRef>& refs,
                               const std::vector<std::size_t>& idx,
                               std::size_t lo, std::size_t hi, int input_len) {
  const auto dim = pack_state(trajs.front().states.front()).size();
  std::vector<Mat> steps(static_cast<std::size_t>(input_len),
                         Mat(dim, static_cast<Eigen::Index>(hi - lo)));
  for (std::size_t k = lo; k < hi; ++k) {
    const auto& r = refs[idx[k]];
    const auto& states = trajs[static_cast<std::size_t>(r.episode)].states;
    for (int s = 0; s < input_len; ++s) {
      steps[static_cast<std::size_t>(s)].col(static_cast<Eigen::Index>(k - lo)) =
          pack_state(states[static_cast<std::size_t>(r.target - input_len + s)]);
    }
  }
  return steps;
}

double rmse_on(const LstmPredictor& model, const std::vector<Trajectory>& trajs,
               const std::vector<WindowRef>& refs) {
  if (refs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> idx(refs.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int input_len = model.window - 1;
  double sq_sum = 0.0;
  long count = 0;
  const std::size_t chunk = 512;
  for (std::size_t lo = 0; lo < refs.size(); lo += chunk) {
    const std::size_t hi = std::min(refs.size(), lo + chunk);
    const auto steps = gather_inputs(trajs, refs, idx, lo, hi, input_len);
    const Mat target = gather_targets(trajs, refs, idx, lo, hi);
    const Mat pred = model.predict_next_batch(steps);
    sq_sum += (pred - target).array().square().sum();
    count += static_cast<long>(target.size());
  }
  return std::sqrt(sq_sum / static_cast<double>(count));
}

}  // namespace

LstmPredictor train_predictor(const std::vector<Trajectory>& benign,
                              const PredictorTrainConfig& cfg, Rng& rng,
                              std::vector<double>* epoch_loss) {
  if (benign.empty()) throw ConfigError("train_predictor: empty corpus");
  const int input_len = cfg.window - 1;
  if (input_len < 1) throw ConfigError("train_predictor: window must be >= 2");
  for (const auto& tr : benign) {
    if (static_cast<int>(tr.states.size()) < cfg.window) {
      throw ConfigError("train_predictor: every trajectory needs >= d states");
    }
  }
  const int n_buses = static_cast<int>(benign.front().states.front().theta.size());
  const int dim = 2 * n_buses;

  // Episode-level train / holdout split.
  std::vector<std::size_t> order(benign.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  const auto holdout =
      static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(benign.size()));
  const std::vector<std::size_t> train_eps(order.begin(), order.end() - static_cast<long>(holdout));
  const std::vector<std::size_t> hold_eps(order.end() - static_cast<long>(holdout), order.end());

  // Sliding-window sample references, capped per episode.
  const auto collect = [&](const std::vector<std::size_t>& eps, bool cap) {
    std::vector<WindowRef> refs;
    for (const auto e : eps) {
      const int last = static_cast<int>(benign[e].states.size()) - 1;
      std::vector<int> targets;
      for (int t = input_len; t <= last; ++t) targets.push_back(t);
      if (cap && static_cast<int>(targets.size()) > cfg.windows_per_episode) {
        rng.shuffle(targets);
        targets.resize(static_cast<std::size_t>(cfg.windows_per_episode));
        std::sort(targets.begin(), targets.end());
      }
      for (const int t : targets) refs.push_back({static_cast<int>(e), t});
    }
    return refs;
  };
  const std::vector<WindowRef> train_refs = collect(train_eps, true);
  const std::vector<WindowRef> hold_refs = collect(hold_eps, false);

  // Normalization over the training episodes' states.
  Vec mean = Vec::Zero(dim);
  Vec sq = Vec::Zero(dim);
  long count = 0;
  for (const auto e : train_eps) {
    for (const auto& s : benign[e].states) {
      const Vec p = pack_state(s);
      mean += p;
      sq += p.array().square().matrix();
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  const Vec var = sq / static_cast<double>(count) - mean.array().square().matrix();
  const Vec scale = var.array().max(0.0).sqrt().max(1e-8);

  LstmPredictor model;
  model.n_buses = n_buses;
  model.window = cfg.window;
  model.cell = nn::LstmCell(cfg.hidden, dim);
  model.head = nn::Linear(dim, cfg.hidden);
  model.norm_mean = mean;
  model.norm_scale = scale;
  nn::init_lstm(model.cell, rng);
  nn::init_linear(model.head, 0.1, rng);

  nn::Adam adam(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  adam.add(model.cell);
  adam.add(model.head);

  const Vec inv_scale = scale.cwiseInverse();
  const auto normalize = [&](Mat m) {
    return Mat((m.colwise() - mean).array().colwise() * inv_scale.array());
  };

  std::vector<std::size_t> idx(train_refs.size());
  std::iota(idx.begin(), idx.end(), 0);
  const int H = cfg.hidden;

  if (epoch_loss != nullptr) epoch_loss->clear();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    long loss_count = 0;
    rng.shuffle(idx);
    for (std::size_t lo = 0; lo < idx.size(); lo += static_cast<std::size_t>(cfg.minibatch)) {
      const std::size_t hi =
          std::min(idx.size(), lo + static_cast<std::size_t>(cfg.minibatch));
      const auto batch = static_cast<Eigen::Index>(hi - lo);

      std::vector<Mat> raw_steps = gather_inputs(benign, train_refs, idx, lo, hi, input_len);
      std::vector<Mat> xs;
      xs.reserve(raw_steps.size());
      for (auto& m : raw_steps) xs.push_back(normalize(std::move(m)));
      const Mat target = normalize(gather_targets(benign, train_refs, idx, lo, hi));

      // Forward through time, caching per step.
      std::vector<nn::LstmCell::Cache> caches(static_cast<std::size_t>(input_len));
      std::vector<Mat> hs(static_cast<std::size_t>(input_len) + 1,
                          Mat::Zero(H, batch));
      Mat c = Mat::Zero(H, batch);
      Mat c_next, h_next;
      for (int s = 0; s < input_len; ++s) {
        model.cell.forward(xs[static_cast<std::size_t>(s)],
                           hs[static_cast<std::size_t>(s)], c, h_next, c_next,
                           &caches[static_cast<std::size_t>(s)]);
        hs[static_cast<std::size_t>(s) + 1] = h_next;
        c = c_next;
      }
      const Mat out = model.head.forward(hs.back());

      // Mean squared error over all elements.
      const Mat diff = out - target;
      const double denom = static_cast<double>(diff.size());
      loss_sum += diff.array().square().sum() / denom;
      ++loss_count;
      const Mat dout = (2.0 / denom) * diff;

      model.cell.zero_grad();
      model.head.zero_grad();
      Mat dh = model.head.backward(hs.back(), dout);
      Mat dc = Mat::Zero(H, batch);
      Mat dx, dh_prev, dc_prev;
      for (int s = input_len - 1; s >= 0; --s) {
        model.cell.backward(caches[static_cast<std::size_t>(s)], dh, dc, dx,
                            dh_prev, dc_prev);
        dh = dh_prev;
        dc = dc_prev;
      }
      adam.step();
    }
    if (epoch_loss != nullptr) {
      epoch_loss->push_back(loss_sum / static_cast<double>(loss_count));
    }
  }

  const auto& rmse_refs = hold_refs.empty() ? train_refs : hold_refs;
  model.holdout_rmse = rmse_on(model, benign, rmse_refs);
  return model;
}

void save_predictor(const LstmPredictor& p, const std::string& path) {
  Json j;
  j["kind"] = "lstm_predictor";
  j["n_buses"] = p.n_buses;
  j["window"] = p.window;
  j["hidden"] = p.cell.hidden_size();
  j["w_input"] = mat_to_json(p.cell.w_input);
  j["w_hidden"] = mat_to_json(p.cell.w_hidden);
  j["bias"] = vec_to_json(p.cell.bias);
  j["head_weight"] = mat_to_json(p.head.weight);
  j["head_bias"] = vec_to_json(p.head.bias);
  j["norm_mean"] = vec_to_json(p.norm_mean);
  j["norm_scale"] = vec_to_json(p.norm_scale);
  j["holdout_rmse"] = p.holdout_rmse;
  save_json_file(j, path);
}

LstmPredictor load_predictor(const std::string& path) {
  const Json j = load_json_file(path);
  if (j.value("kind", "") != "lstm_predictor") {
    throw ConfigError(path + " is not an lstm_predictor artifact");
  }
  LstmPredictor p;
  p.n_buses = j.at("n_buses").get<int>();
  p.window = j.at("window").get<int>();
  const int hidden = j.at("hidden").get<int>();
  const int dim = 2 * p.n_buses;
  p.cell = nn::LstmCell(hidden, dim);
  p.cell.w_input = mat_from_json(j.at("w_input"), "w_input");
  p.cell.w_hidden = mat_from_json(j.at("w_hidden"), "w_hidden");
  p.cell.bias = vec_from_json(j.at("bias"), "bias");
  p.head = nn::Linear(dim, hidden);
  p.head.weight = mat_from_json(j.at("head_weight"), "head_weight");
  p.head.bias = vec_from_json(j.at("head_bias"), "head_bias");
  p.norm_mean = vec_from_json(j.at("norm_mean"), "norm_mean");
  p.norm_scale = vec_from_json(j.at("norm_scale"), "norm_scale");
  p.holdout_rmse = j.value("holdout_rmse", std::numeric_limits<double>::quiet_NaN());

  if (p.cell.w_input.rows() != 4 * hidden || p.cell.w_input.cols() != dim ||
      p.cell.w_hidden.rows() != 4 * hidden || p.cell.w_hidden.cols() != hidden ||
      p.cell.bias.size() != 4 * hidden || p.head.weight.rows() != dim ||
      p.head.weight.cols() != hidden || p.head.bias.size() != dim ||
      p.norm_mean.size() != dim || p.norm_scale.size() != dim) {
    throw ConfigError(path + ": predictor weight shapes are inconsistent");
  }
  if ((p.norm_scale.array() <= 0.0).any()) {
    throw ConfigError(path + ": predictor norm_scale must be positive");
  }
  if (p.window < 2) throw ConfigError(path + ": predictor window must be >= 2");
  return p;
}

}  // namespace fdia
