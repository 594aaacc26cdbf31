#pragma once

#include "fdia/env.hpp"
#include "fdia/io.hpp"
#include "fdia/offline.hpp"
#include "fdia/policy.hpp"

#include <functional>
#include <optional>
#include <string>

namespace fdia {

// Greedy deciders. Attackers map the adversary observation to a raw action;
// defenders map the residual to a label. The oracle defender (which needs
// the window label) is selected with EvalOptions::oracle_defender instead.
using AttackerFn = std::function<AdversaryAction(const Eigen::Ref<const Vec>&)>;
using DefenderFn = std::function<int(const Eigen::Ref<const Vec>&)>;

AttackerFn scripted_no_attack();
// g^A = bus, c = -1, m = 0 at every step.
AttackerFn time_invariant_attack(int bus);
AttackerFn policy_attacker(PolicyNet net);
DefenderFn policy_defender(PolicyNet net);
DefenderFn classifier_defender(OfflineClassifier clf);
DefenderFn always_no_attack_defender();

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  bool oracle_defender = false;  // answer the true window label
  std::string trace_dir;         // per-episode CSV traces when non-empty
};

struct EvalReport {
  int episodes = 0;
  std::uint64_t seed = 0;
  long decisions = 0;
  long correct = 0;
  double accuracy_pct = 0.0;
  VecI per_class_total;       // N+1, class order (0 <-> label -1)
  VecI per_class_correct;
  MatI confusion;             // (N+1)x(N+1), row = truth, col = predicted
  double total_deviation = 0.0;  // sum over episodes and steps of r^w
  Vec bus_freq;               // raw g^A histogram, N+1 entries
  Vec c_freq;                 // raw c histogram, 3 entries (-1, 0, 1)
  Vec mute_freq;              // 2 entries

  Json to_json() const;
  std::string to_text() const;
};

EvalReport evaluate_defender(const EnvConfig& cfg, const DefenderFn& defender,
                             const AttackerFn& attacker, const EvalOptions& opts);

struct ActionStats {
  Vec bus_freq;
  Vec c_freq;
  Vec mute_freq;
};

// Raw action frequencies of a greedy attacker over fresh episodes.
ActionStats action_statistics(const EnvConfig& cfg, const AttackerFn& attacker,
                              int episodes, std::uint64_t seed, int threads);

// Accuracy and deviation recomputed from an exported trace CSV; the
// independent recount oracle for EvalReport.
struct TraceRecount {
  long decisions = 0;
  long correct = 0;
  double total_deviation = 0.0;
};
TraceRecount recount_trace_csv(const std::string& path);

}  // namespace fdia
