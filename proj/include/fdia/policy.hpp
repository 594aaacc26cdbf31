#pragma once

#include "fdia/attack.hpp"
#include "fdia/nn.hpp"
#include "fdia/offline.hpp"
#include "fdia/rng.hpp"

#include <string>
#include <vector>

namespace fdia {

// Initialization scales shared by both agents.
inline constexpr double kTrunkInitGain = 1.4142135623730951;  // sqrt(2)
inline constexpr double kPolicyHeadInitScale = 0.01;
inline constexpr double kValueHeadInitScale = 0.005;

struct PolicyForward {
  Mat x, h1, h2;
  std::vector<Mat> head_logits;
  std::vector<Mat> head_probs;
  Vec values;
};

// Shared actor-critic body: 2x256 tanh trunk, independent categorical
// heads, scalar value head. The adversary uses heads {N+1, 3, 2} for
// (g^A, c, m); the defender a single N+1 head.
struct PolicyNet {
  nn::Linear l1, l2;
  std::vector<nn::Linear> heads;
  nn::Linear value_head;

  int obs_dim() const { return l1.in_size(); }
  int hidden_size() const { return l1.out_size(); }
  std::vector<int> head_sizes() const;

  PolicyForward forward(const Mat& obs) const;
  void zero_grad();
  // dlogits: one matrix per head; dvalues: 1 x batch. Accumulates into the
  // layer gradients.
  void backward(const PolicyForward& fwd, const std::vector<Mat>& dlogits,
                const Eigen::RowVectorXd& dvalues);
};

PolicyNet make_policy(int obs_dim, const std::vector<int>& head_sizes,
                      int hidden, Rng& rng);
PolicyNet make_adversary_policy(int n_buses, Rng& rng);  // obs 2N+1
PolicyNet make_defender_policy(int n_buses, Rng& rng);   // obs 2N

// Copies the classifier's trunk and class head into a defender policy; the
// value head is freshly initialized at kValueHeadInitScale.
PolicyNet warm_start_defender(const OfflineClassifier& clf, Rng& rng);

// Inverse-CDF categorical draw.
int sample_class(const Eigen::Ref<const Vec>& probs, Rng& rng);

// Adversary head classes <-> action fields. Head 0: 0 <-> no attack,
// i+1 <-> bus i. Head 1: {0,1,2} <-> c in {-1,0,1}. Head 2: mute flag.
AdversaryAction decode_adversary_action(int bus_cls, int c_cls, int m_cls);

AdversaryAction greedy_adversary_action(const PolicyNet& net,
                                        const Eigen::Ref<const Vec>& obs);
int greedy_defender_action(const PolicyNet& net,
                           const Eigen::Ref<const Vec>& residual);

void save_policy(const PolicyNet& net, const std::string& path);
PolicyNet load_policy(const std::string& path);

}  // namespace fdia
