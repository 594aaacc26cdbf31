#include "fdia/eval.hpp"

#include "fdia/parallel.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fdia {

AttackerFn scripted_no_attack() {
  return [](const Eigen::Ref<const Vec>&) { return AdversaryAction{}; };
}

AttackerFn time_invariant_attack(int bus) {
  if (bus < 0) throw std::invalid_argument("time_invariant_attack: bus must be >= 0");
  return [bus](const Eigen::Ref<const Vec>&) {
    return AdversaryAction{bus, -1, false};
  };
}

AttackerFn policy_attacker(PolicyNet net) {
  return [net = std::move(net)](const Eigen::Ref<const Vec>& obs) {
    return greedy_adversary_action(net, obs);
  };
}

DefenderFn policy_defender(PolicyNet net) {
  return [net = std::move(net)](const Eigen::Ref<const Vec>& residual) {
    return greedy_defender_action(net, residual);
  };
}

DefenderFn classifier_defender(OfflineClassifier clf) {
  return [clf = std::move(clf)](const Eigen::Ref<const Vec>& residual) {
    return classify(clf, residual);
  };
}

DefenderFn always_no_attack_defender() {
  return [](const Eigen::Ref<const Vec>&) { return kNoAttack; };
}

namespace {

struct EpisodeTally {
  long decisions = 0;
  long correct = 0;
  MatI confusion;
  VecI per_total;
  VecI per_correct;
  double deviation = 0.0;
  Vec bus_counts;
  Vec c_counts;
  Vec mute_counts;
};

void write_trace_header(std::ofstream& out, int n_buses) {
  out << "t";
  for (int i = 0; i < n_buses; ++i) out << ",theta" << i;
  for (int i = 0; i < n_buses; ++i) out << ",omega" << i;
  out << ",g_A,c,m,effective_bus,adv_reward,deviation,is_detection,"
         "def_action,label,def_reward,detection_success\n";
}

}  // namespace

EvalReport evaluate_defender(const EnvConfig& cfg, const DefenderFn& defender,
                             const AttackerFn& attacker, const EvalOptions& opts) {
  cfg.validate();
  if (opts.episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  const int n_buses = cfg.grid->n_buses;
  const int n_classes = n_buses + 1;

  std::vector<EpisodeTally> tallies(static_cast<std::size_t>(opts.episodes));
  parallel_for(opts.episodes, opts.threads, [&](long ep) {
    EpisodeTally tally;
    tally.confusion = MatI::Zero(n_classes, n_classes);
    tally.per_total = VecI::Zero(n_classes);
    tally.per_correct = VecI::Zero(n_classes);
    tally.bus_counts = Vec::Zero(n_classes);
    tally.c_counts = Vec::Zero(3);
    tally.mute_counts = Vec::Zero(2);

    Rng rng(Rng::derive(opts.seed, static_cast<std::uint64_t>(ep)));
    EpisodeContext ctx = reset(cfg, rng);

    std::ofstream trace;
    if (!opts.trace_dir.empty()) {
      trace.open(opts.trace_dir + "/episode_" + std::to_string(ep) + ".csv");
      if (!trace) throw ConfigError("cannot write traces under " + opts.trace_dir);
      write_trace_header(trace, n_buses);
    }

    for (int t = 0; t < cfg.grid->steps; ++t) {
      const Vec obs = adversary_observation(cfg, ctx);
      const AdversaryAction a = attacker(obs);
      tally.bus_counts[a.bus + 1] += 1.0;
      tally.c_counts[a.droop_value + 1] += 1.0;
      tally.mute_counts[a.mute ? 1 : 0] += 1.0;

      std::optional<int> decided;
      if (is_detection_step(ctx)) {
        decided = opts.oracle_defender
                      ? peek_window_label(ctx, a)
                      : defender(defender_observation(cfg, ctx));
      }
      const StepOutcome out = env_step(cfg, ctx, a, decided);
      const double deviation = adv_step_reward(cfg, ctx, ctx.current_step);
      tally.deviation += deviation;

      if (out.detection_step) {
        const int truth = label_to_class(out.window_label);
        const int pred = label_to_class(*decided);
        tally.decisions += 1;
        tally.per_total[truth] += 1;
        tally.confusion(truth, pred) += 1;
        if (truth == pred) {
          tally.correct += 1;
          tally.per_correct[truth] += 1;
        }
      }
      if (trace.is_open()) {
        const SystemState& s = ctx.observed[static_cast<std::size_t>(t + 1)];
        trace << t;
        for (int i = 0; i < n_buses; ++i) trace << ',' << format_double(s.theta[i]);
        for (int i = 0; i < n_buses; ++i) trace << ',' << format_double(s.omega[i]);
        trace << ',' << a.bus << ',' << a.droop_value << ',' << (a.mute ? 1 : 0)
              << ',' << out.effective_bus << ','
              << format_double(out.adversary_reward) << ','
              << format_double(deviation) << ',' << (out.detection_step ? 1 : 0)
              << ',' << (decided ? *decided : kNoAttack) << ','
              << out.window_label << ','
              << format_double(out.defender_reward.value_or(0.0)) << ','
              << (out.detection_success ? 1 : 0) << '\n';
      }
    }
    tallies[static_cast<std::size_t>(ep)] = std::move(tally);
  });

  EvalReport report;
  report.episodes = opts.episodes;
  report.seed = opts.seed;
  report.per_class_total = VecI::Zero(n_classes);
  report.per_class_correct = VecI::Zero(n_classes);
  report.confusion = MatI::Zero(n_classes, n_classes);
  report.bus_freq = Vec::Zero(n_classes);
  report.c_freq = Vec::Zero(3);
  report.mute_freq = Vec::Zero(2);
  for (const auto& tally : tallies) {
    report.decisions += tally.decisions;
    report.correct += tally.correct;
    report.per_class_total += tally.per_total;
    report.per_class_correct += tally.per_correct;
    report.confusion += tally.confusion;
    report.total_deviation += tally.deviation;
    report.bus_freq += tally.bus_counts;
    report.c_freq += tally.c_counts;
    report.mute_freq += tally.mute_counts;
  }
  report.accuracy_pct = report.decisions > 0
                            ? 100.0 * static_cast<double>(report.correct) /
                                  static_cast<double>(report.decisions)
                            : 0.0;
  const double steps = report.bus_freq.sum();
  if (steps > 0.0) {
    report.bus_freq /= steps;
    report.c_freq /= steps;
    report.mute_freq /= steps;
  }
  return report;
}

ActionStats action_statistics(const EnvConfig& cfg, const AttackerFn& attacker,
                              int episodes, std::uint64_t seed, int threads) {
  EvalOptions opts;
  opts.episodes = episodes;
  opts.seed = seed;
  opts.threads = threads;
  const EvalReport report =
      evaluate_defender(cfg, always_no_attack_defender(), attacker, opts);
  return ActionStats{report.bus_freq, report.c_freq, report.mute_freq};
}

Json EvalReport::to_json() const {
  Json j;
  j["episodes"] = episodes;
  j["seed"] = seed;
  j["decisions"] = decisions;
  j["correct"] = correct;
  j["accuracy_pct"] = accuracy_pct;
  const int n_classes = static_cast<int>(per_class_total.size());
  Json per_class = Json::array();
  for (int cls = 0; cls < n_classes; ++cls) {
    Json row;
    row["label"] = class_to_label(cls);
    row["total"] = per_class_total[cls];
    row["correct"] = per_class_correct[cls];
    row["accuracy_pct"] = per_class_total[cls] > 0
                              ? 100.0 * per_class_correct[cls] / per_class_total[cls]
                              : 0.0;
    per_class.push_back(std::move(row));
  }
  j["per_class"] = std::move(per_class);
  Json confusion_rows = Json::array();
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < confusion.cols(); ++k) row.push_back(confusion(i, k));
    confusion_rows.push_back(std::move(row));
  }
  j["confusion"] = std::move(confusion_rows);
  j["total_deviation"] = total_deviation;
  j["action_histogram"]["bus"] = vec_to_json(bus_freq);
  j["action_histogram"]["c"] = vec_to_json(c_freq);
  j["action_histogram"]["mute"] = vec_to_json(mute_freq);
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "episodes: " << episodes << "  seed: " << seed << '\n';
  os << "detection accuracy: " << accuracy_pct << "% (" << correct << "/"
     << decisions << " decisions)\n";
  os << "total scaled deviation sum r^w: " << std::setprecision(4)
     << total_deviation << '\n';
  os << std::setprecision(2);
  os << "per-label accuracy:\n";
  os << "  label   total   correct   acc%\n";
  const int n_classes = static_cast<int>(per_class_total.size());
  for (int cls = 0; cls < n_classes; ++cls) {
    const double acc = per_class_total[cls] > 0
                           ? 100.0 * per_class_correct[cls] / per_class_total[cls]
                           : 0.0;
    os << std::setw(7) << class_to_label(cls) << std::setw(8) << per_class_total[cls]
       << std::setw(10) << per_class_correct[cls] << std::setw(7) << acc << '\n';
  }
  os << "adversary c histogram (-1, 0, 1): " << c_freq.transpose() << '\n';
  os << "adversary mute histogram (0, 1): " << mute_freq.transpose() << '\n';
  return os.str();
}

TraceRecount recount_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty trace");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(path + ": trace missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_det = column("is_detection");
  const std::size_t c_def = column("def_action");
  const std::size_t c_label = column("label");
  const std::size_t c_dev = column("deviation");

  TraceRecount rc;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rc.total_deviation += std::stod(cells.at(c_dev));
    if (cells.at(c_det) == "1") {
      rc.decisions += 1;
      if (std::stoi(cells.at(c_def)) == std::stoi(cells.at(c_label))) {
        rc.correct += 1;
      }
    }
  }
  return rc;
}

}  // namespace fdia
