#pragma once

#include "fdia/common.hpp"
#include "fdia/rng.hpp"

#include <vector>

namespace fdia::nn {

// Batches are stored column-wise: one sample per column.

Mat tanh_forward(const Mat& x);
// Input gradient given the activation output y and upstream gradient dy.
Mat tanh_backward(const Mat& y, const Mat& dy);
Mat sigmoid(const Mat& x);
// Column-wise softmax with max subtraction.
Mat softmax(const Mat& logits);
// Column-wise log(sum(exp(logits))).
Vec log_sum_exp(const Mat& logits);

struct Linear {
  Mat weight;  // out x in
  Vec bias;    // out
  Mat grad_weight;
  Vec grad_bias;

  Linear() = default;
  Linear(int out, int in);

  int in_size() const { return static_cast<int>(weight.cols()); }
  int out_size() const { return static_cast<int>(weight.rows()); }

  Mat forward(const Mat& x) const { return (weight * x).colwise() + bias; }
  // Accumulates parameter gradients, returns the input gradient.
  Mat backward(const Mat& x, const Mat& dy);
  void zero_grad();
};

// Single LSTM cell. The stacked gate rows are ordered
// [input; forget; cell candidate; output], each `hidden` rows tall.
struct LstmCell {
  Mat w_input;   // 4H x in
  Mat w_hidden;  // 4H x H
  Vec bias;      // 4H
  Mat grad_w_input;
  Mat grad_w_hidden;
  Vec grad_bias;

  LstmCell() = default;
  LstmCell(int hidden, int input);

  int hidden_size() const { return static_cast<int>(w_hidden.cols()); }
  int input_size() const { return static_cast<int>(w_input.cols()); }

  struct Cache {
    Mat x, h_prev, c_prev;
    Mat gate_i, gate_f, gate_g, gate_o;
    Mat c, tanh_c;
  };

  void forward(const Mat& x, const Mat& h_prev, const Mat& c_prev, Mat& h_out,
               Mat& c_out, Cache* cache) const;
  // dh/dc flow into this step's outputs; fills the gradients for x, h_prev,
  // c_prev and accumulates parameter gradients.
  void backward(const Cache& cache, const Mat& dh, const Mat& dc, Mat& dx,
                Mat& dh_prev, Mat& dc_prev);
  void zero_grad();
};

// Mean cross-entropy of column-wise softmax vs integer class targets.
// When dlogits is non-null it receives the gradient of the mean loss.
double softmax_cross_entropy(const Mat& logits, const std::vector<int>& targets,
                             Mat* dlogits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Flat Adam over registered parameter/gradient pairs. Registered tensors
// must keep stable addresses for the optimizer's lifetime.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  void add(Mat& param, Mat& grad);
  void add(Vec& param, Vec& grad);
  void add(Linear& l);
  void add(LstmCell& c);
  void step();
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  struct Slot {
    double* param;
    const double* grad;
    Eigen::Index n;
    Vec m, v;
  };
  void add_flat(double* param, const double* grad, Eigen::Index n);

  std::vector<Slot> slots_;
  AdamConfig cfg_;
  long t_ = 0;
};

// Gaussian fill in storage order (column-major), then thin QR with the sign
// of R's diagonal fixed, scaled by gain. Rows and cols may be any shape.
Mat orthogonal_init(int rows, int cols, double gain, Rng& rng);
// Orthogonal weight, zero bias.
void init_linear(Linear& l, double gain, Rng& rng);
// Orthogonal gate blocks, zero bias with the forget gate at 1.
void init_lstm(LstmCell& c, Rng& rng);

}  // namespace fdia::nn
