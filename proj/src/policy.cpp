#include "fdia/policy.hpp"

#include "fdia/io.hpp"

namespace fdia {

std::vector<int> PolicyNet::head_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(heads.size());
  for (const auto& h : heads) sizes.push_back(h.out_size());
  return sizes;
}

PolicyForward PolicyNet::forward(const Mat& obs) const {
  if (obs.rows() != obs_dim()) {
    throw std::invalid_argument("policy forward: observation dimension mismatch");
  }
  PolicyForward f;
  f.x = obs;
  f.h1 = nn::tanh_forward(l1.forward(obs));
  f.h2 = nn::tanh_forward(l2.forward(f.h1));
  f.head_logits.reserve(heads.size());
  f.head_probs.reserve(heads.size());
  for (const auto& head : heads) {
    f.head_logits.push_back(head.forward(f.h2));
    f.head_probs.push_back(nn::softmax(f.head_logits.back()));
  }
  f.values = value_head.forward(f.h2).row(0).transpose();
  return f;
}

void PolicyNet::zero_grad() {
  l1.zero_grad();
  l2.zero_grad();
  for (auto& h : heads) h.zero_grad();
  value_head.zero_grad();
}

void PolicyNet::backward(const PolicyForward& fwd, const std::vector<Mat>& dlogits,
                         const Eigen::RowVectorXd& dvalues) {
  if (dlogits.size() != heads.size()) {
    throw std::invalid_argument("policy backward: head gradient count mismatch");
  }
  Mat dh2 = Mat::Zero(fwd.h2.rows(), fwd.h2.cols());
  for (std::size_t h = 0; h < heads.size(); ++h) {
    dh2 += heads[h].backward(fwd.h2, dlogits[h]);
  }
  dh2 += value_head.backward(fwd.h2, dvalues);
  const Mat dh1 = nn::tanh_backward(fwd.h1, l2.backward(fwd.h1, nn::tanh_backward(fwd.h2, dh2)));
  l1.backward(fwd.x, dh1);
}

PolicyNet make_policy(int obs_dim, const std::vector<int>& head_sizes,
                      int hidden, Rng& rng) {
  PolicyNet net;
  net.l1 = nn::Linear(hidden, obs_dim);
  net.l2 = nn::Linear(hidden, hidden);
  nn::init_linear(net.l1, kTrunkInitGain, rng);
  nn::init_linear(net.l2, kTrunkInitGain, rng);
  for (const int size : head_sizes) {
    net.heads.emplace_back(size, hidden);
    nn::init_linear(net.heads.back(), kPolicyHeadInitScale, rng);
  }
  net.value_head = nn::Linear(1, hidden);
  nn::init_linear(net.value_head, kValueHeadInitScale, rng);
  return net;
}

PolicyNet make_adversary_policy(int n_buses, Rng& rng) {
  return make_policy(2 * n_buses + 1, {n_buses + 1, 3, 2}, 256, rng);
}

PolicyNet make_defender_policy(int n_buses, Rng& rng) {
  return make_policy(2 * n_buses, {n_buses + 1}, 256, rng);
}

PolicyNet warm_start_defender(const OfflineClassifier& clf, Rng& rng) {
  PolicyNet net;
  net.l1 = clf.l1;
  net.l2 = clf.l2;
  net.heads = {clf.head};
  net.l1.zero_grad();
  net.l2.zero_grad();
  net.heads[0].zero_grad();
  net.value_head = nn::Linear(1, clf.l2.out_size());
  nn::init_linear(net.value_head, kValueHeadInitScale, rng);
  return net;
}

int sample_class(const Eigen::Ref<const Vec>& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (int i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return static_cast<int>(probs.size()) - 1;
}

AdversaryAction decode_adversary_action(int bus_cls, int c_cls, int m_cls) {
  AdversaryAction a;
  a.bus = bus_cls - 1;
  a.droop_value = c_cls - 1;
  a.mute = m_cls == 1;
  return a;
}

AdversaryAction greedy_adversary_action(const PolicyNet& net,
                                        const Eigen::Ref<const Vec>& obs) {
  const PolicyForward f = net.forward(obs);
  return decode_adversary_action(argmax_class(f.head_probs[0].col(0)),
                                 argmax_class(f.head_probs[1].col(0)),
                                 argmax_class(f.head_probs[2].col(0)));
}

int greedy_defender_action(const PolicyNet& net,
                           const Eigen::Ref<const Vec>& residual) {
  const PolicyForward f = net.forward(residual);
  return class_to_label(argmax_class(f.head_probs[0].col(0)));
}

void save_policy(const PolicyNet& net, const std::string& path) {
  Json j;
  j["kind"] = "policy";
  j["obs_dim"] = net.obs_dim();
  j["hidden"] = net.hidden_size();
  j["head_sizes"] = net.head_sizes();
  j["l1_weight"] = mat_to_json(net.l1.weight);
  j["l1_bias"] = vec_to_json(net.l1.bias);
  j["l2_weight"] = mat_to_json(net.l2.weight);
  j["l2_bias"] = vec_to_json(net.l2.bias);
  Json heads = Json::array();
  for (const auto& h : net.heads) {
    Json hj;
    hj["weight"] = mat_to_json(h.weight);
    hj["bias"] = vec_to_json(h.bias);
    heads.push_back(std::move(hj));
  }
  j["heads"] = std::move(heads);
  j["value_weight"] = mat_to_json(net.value_head.weight);
  j["value_bias"] = vec_to_json(net.value_head.bias);
  save_json_file(j, path);
}

PolicyNet load_policy(const std::string& path) {
  const Json j = load_json_file(path);
  if (j.value("kind", "") != "policy") {
    throw ConfigError(path + " is not a policy artifact");
  }
  const int obs_dim = j.at("obs_dim").get<int>();
  const int hidden = j.at("hidden").get<int>();
  const auto sizes = j.at("head_sizes").get<std::vector<int>>();
  PolicyNet net;
  net.l1 = nn::Linear(hidden, obs_dim);
  net.l2 = nn::Linear(hidden, hidden);
  net.l1.weight = mat_from_json(j.at("l1_weight"), "l1_weight");
  net.l1.bias = vec_from_json(j.at("l1_bias"), "l1_bias");
  net.l2.weight = mat_from_json(j.at("l2_weight"), "l2_weight");
  net.l2.bias = vec_from_json(j.at("l2_bias"), "l2_bias");
  std::size_t k = 0;
  for (const auto& hj : j.at("heads")) {
    if (k >= sizes.size()) throw ConfigError(path + ": extra policy heads");
    net.heads.emplace_back(sizes[k], hidden);
    net.heads.back().weight = mat_from_json(hj.at("weight"), "head weight");
    net.heads.back().bias = vec_from_json(hj.at("bias"), "head bias");
    ++k;
  }
  if (k != sizes.size()) throw ConfigError(path + ": missing policy heads");
  net.value_head = nn::Linear(1, hidden);
  net.value_head.weight = mat_from_json(j.at("value_weight"), "value_weight");
  net.value_head.bias = vec_from_json(j.at("value_bias"), "value_bias");

  if (net.l1.weight.cols() != obs_dim || net.l1.weight.rows() != hidden ||
      net.l2.weight.rows() != hidden || net.value_head.weight.cols() != hidden) {
    throw ConfigError(path + ": policy weight shapes are inconsistent");
  }
  for (std::size_t i = 0; i < net.heads.size(); ++i) {
    if (net.heads[i].weight.rows() != sizes[i] ||
        net.heads[i].weight.cols() != hidden) {
      throw ConfigError(path + ": policy head shapes are inconsistent");
    }
  }
  return net;
}

}  // namespace fdia
