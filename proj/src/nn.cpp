#include "fdia/nn.hpp"

#include <cmath>

namespace fdia::nn {

Mat tanh_forward(const Mat& x) { return x.array().tanh(); }

Mat tanh_backward(const Mat& y, const Mat& dy) {
  return ((1.0 - y.array().square()) * dy.array()).matrix();
}

Mat sigmoid(const Mat& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

Mat softmax(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    p.col(j).array() -= p.col(j).maxCoeff();
    p.col(j) = p.col(j).array().exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

Vec log_sum_exp(const Mat& logits) {
  Vec out(logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    out[j] = m + std::log((logits.col(j).array() - m).exp().sum());
  }
  return out;
}

Linear::Linear(int out, int in)
    : weight(Mat::Zero(out, in)),
      bias(Vec::Zero(out)),
      grad_weight(Mat::Zero(out, in)),
      grad_bias(Vec::Zero(out)) {}

Mat Linear::backward(const Mat& x, const Mat& dy) {
  grad_weight.noalias() += dy * x.transpose();
  grad_bias.noalias() += dy.rowwise().sum();
  return weight.transpose() * dy;
}

void Linear::zero_grad() {
  grad_weight.setZero();
  grad_bias.setZero();
}

LstmCell::LstmCell(int hidden, int input)
    : w_input(Mat::Zero(4 * hidden, input)),
      w_hidden(Mat::Zero(4 * hidden, hidden)),
      bias(Vec::Zero(4 * hidden)),
      grad_w_input(Mat::Zero(4 * hidden, input)),
      grad_w_hidden(Mat::Zero(4 * hidden, hidden)),
      grad_bias(Vec::Zero(4 * hidden)) {}

void LstmCell::forward(const Mat& x, const Mat& h_prev, const Mat& c_prev,
                       Mat& h_out, Mat& c_out, Cache* cache) const {
  const int H = hidden_size();
  Mat pre = w_input * x + w_hidden * h_prev;
  pre.colwise() += bias;

  const Mat gi = sigmoid(pre.topRows(H));
  const Mat gf = sigmoid(pre.middleRows(H, H));
  const Mat gg = tanh_forward(pre.middleRows(2 * H, H));
  const Mat go = sigmoid(pre.bottomRows(H));

  c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
  const Mat tc = tanh_forward(c_out);
  h_out = go.cwiseProduct(tc);

  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gate_i = gi;
    cache->gate_f = gf;
    cache->gate_g = gg;
    cache->gate_o = go;
    cache->c = c_out;
    cache->tanh_c = tc;
  }
}

void LstmCell::backward(const Cache& cache, const Mat& dh, const Mat& dc,
                        Mat& dx, Mat& dh_prev, Mat& dc_prev) {
  const int H = hidden_size();

  const Mat d_o = dh.cwiseProduct(cache.tanh_c);
  const Mat dc_total =
      dc + dh.cwiseProduct(cache.gate_o)
               .cwiseProduct((1.0 - cache.tanh_c.array().square()).matrix());

  const Mat d_f = dc_total.cwiseProduct(cache.c_prev);
  const Mat d_i = dc_total.cwiseProduct(cache.gate_g);
  const Mat d_g = dc_total.cwiseProduct(cache.gate_i);
  dc_prev = dc_total.cwiseProduct(cache.gate_f);

  // Through the gate nonlinearities to the pre-activations.
  Mat dpre(4 * H, dh.cols());
  dpre.topRows(H) =
      d_i.cwiseProduct(cache.gate_i)
          .cwiseProduct((1.0 - cache.gate_i.array()).matrix());
  dpre.middleRows(H, H) =
      d_f.cwiseProduct(cache.gate_f)
          .cwiseProduct((1.0 - cache.gate_f.array()).matrix());
  dpre.middleRows(2 * H, H) =
      d_g.cwiseProduct((1.0 - cache.gate_g.array().square()).matrix());
  dpre.bottomRows(H) =
      d_o.cwiseProduct(cache.gate_o)
          .cwiseProduct((1.0 - cache.gate_o.array()).matrix());

  grad_w_input.noalias() += dpre * cache.x.transpose();
  grad_w_hidden.noalias() += dpre * cache.h_prev.transpose();
  grad_bias.noalias() += dpre.rowwise().sum();

  dx = w_input.transpose() * dpre;
  dh_prev = w_hidden.transpose() * dpre;
}

void LstmCell::zero_grad() {
  grad_w_input.setZero();
  grad_w_hidden.setZero();
  grad_bias.setZero();
}

double softmax_cross_entropy(const Mat& logits, const std::vector<int>& targets,
                             Mat* dlogits) {
  const auto batch = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != batch) {
    throw std::invalid_argument("softmax_cross_entropy: target count mismatch");
  }
  const Vec lse = log_sum_exp(logits);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    loss += lse[j] - logits(targets[static_cast<std::size_t>(j)], j);
  }
  loss /= static_cast<double>(batch);
  if (dlogits != nullptr) {
    *dlogits = softmax(logits);
    for (Eigen::Index j = 0; j < batch; ++j) {
      (*dlogits)(targets[static_cast<std::size_t>(j)], j) -= 1.0;
    }
    *dlogits /= static_cast<double>(batch);
  }
  return loss;
}

void Adam::add_flat(double* param, const double* grad, Eigen::Index n) {
  slots_.push_back(Slot{param, grad, n, Vec::Zero(n), Vec::Zero(n)});
}

void Adam::add(Mat& param, Mat& grad) { add_flat(param.data(), grad.data(), param.size()); }
void Adam::add(Vec& param, Vec& grad) { add_flat(param.data(), grad.data(), param.size()); }

void Adam::add(Linear& l) {
  add(l.weight, l.grad_weight);
  add(l.bias, l.grad_bias);
}

void Adam::add(LstmCell& c) {
  add(c.w_input, c.grad_w_input);
  add(c.w_hidden, c.grad_w_hidden);
  add(c.bias, c.grad_bias);
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    Eigen::Map<Vec> p(s.param, s.n);
    Eigen::Map<const Vec> g(s.grad, s.n);
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v.array().matrix() +
          (1.0 - cfg_.beta2) * g.array().square().matrix();
    p.array() -= cfg_.lr * (s.m.array() / bc1) /
                 ((s.v.array() / bc2).sqrt() + cfg_.eps);
  }
}

Mat orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  const bool tall = rows >= cols;
  const int r = tall ? rows : cols;
  const int c = tall ? cols : rows;
  Mat a(r, c);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(r, c);
  const Mat rmat = qr.matrixQR().topRows(c).triangularView<Eigen::Upper>();
  for (int j = 0; j < c; ++j) {
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  Mat out = tall ? q : Mat(q.transpose());
  return gain * out;
}

void init_linear(Linear& l, double gain, Rng& rng) {
  l.weight = orthogonal_init(l.out_size(), l.in_size(), gain, rng);
  l.bias.setZero();
}

void init_lstm(LstmCell& c, Rng& rng) {
  const int H = c.hidden_size();
  for (int block = 0; block < 4; ++block) {
    c.w_input.middleRows(block * H, H) =
        orthogonal_init(H, c.input_size(), 1.0, rng);
    c.w_hidden.middleRows(block * H, H) = orthogonal_init(H, H, 1.0, rng);
  }
  c.bias.setZero();
  c.bias.segment(H, H).setOnes();  // forget-gate bias
}

}  // namespace fdia::nn
