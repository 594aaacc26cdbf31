// Command-line front end: predictor training, synthetic FDIA dataset
// generation, offline classifier training, MARL / warm-started MARL
// training, and evaluation. Every command writes a run manifest with the
// effective config, the seed, and content hashes of inputs and artifacts.

#include "fdia/config.hpp"
#include "fdia/eval.hpp"
#include "fdia/io.hpp"
#include "fdia/offline.hpp"
#include "fdia/policy.hpp"
#include "fdia/ppo.hpp"
#include "fdia/predictor.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace {

using namespace fdia;
namespace fs = std::filesystem;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string default_config_path() {
  if (const char* dir = std::getenv("FDIA_CONFIG_DIR")) {
    return std::string(dir) + "/default.json";
  }
  return "configs/default.json";
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string profile = "desk";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Config file (JSON)")
      ->default_val(default_config_path());
  cmd->add_option("--seed", args.seed, "Master seed")->default_val("0");
  cmd->add_option("--threads", args.threads,
                  "Worker threads; 1 guarantees bitwise reproducibility")
      ->default_val("1");
}

int cmd_train_predictor(const CommonArgs& args, const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  AppConfig cfg = load_app_config(args.config_path, args.profile);

  const auto corpus = simulate_benign_corpus(
      cfg.grid, cfg.predictor.episodes, cfg.env.init_disturbance,
      Rng::derive(args.seed, 0xBE11), args.threads);
  Rng rng(Rng::derive(args.seed, 0x9ED1));
  const LstmPredictor model = train_predictor(corpus, cfg.predictor, rng);
  save_predictor(model, out_path);

  RunManifest manifest("train-predictor", args.seed);
  manifest.set_config(cfg.effective);
  manifest.add_input(args.config_path);
  manifest.add_artifact(out_path);
  manifest.add_note("holdout_rmse", model.holdout_rmse);
  manifest.add_timing("total", seconds_since(t0));
  manifest.write(out_path + ".manifest.json");
  std::cout << "predictor written to " << out_path
            << " (holdout RMSE " << model.holdout_rmse << ")\n";
  return 0;
}

int cmd_gen_offline_data(const CommonArgs& args, const std::string& predictor_path,
                         const std::string& out_path, int episodes_override) {
  const auto t0 = std::chrono::steady_clock::now();
  AppConfig cfg = load_app_config(args.config_path, args.profile);
  if (episodes_override > 0) cfg.offline.episodes = episodes_override;

  const LstmPredictor predictor = load_predictor(predictor_path);
  const auto dataset = generate_fdia_dataset(cfg.grid, predictor, cfg.offline,
                                             args.seed, args.threads);
  save_dataset_csv(dataset, out_path);

  Json label_hist = Json::object();
  for (const auto& row : dataset) {
    label_hist[std::to_string(row.label)] =
        label_hist.value(std::to_string(row.label), 0) + 1;
  }
  RunManifest manifest("gen-offline-data", args.seed);
  manifest.set_config(cfg.effective);
  manifest.add_input(args.config_path);
  manifest.add_input(predictor_path);
  manifest.add_artifact(out_path);
  manifest.add_note("windows", static_cast<long>(dataset.size()));
  manifest.add_note("label_histogram", label_hist);
  manifest.add_timing("total", seconds_since(t0));
  manifest.write(out_path + ".manifest.json");
  std::cout << "dataset with " << dataset.size() << " windows written to "
            << out_path << "\n";
  return 0;
}

int cmd_train_offline(const CommonArgs& args, const std::string& dataset_path,
                      const std::string& out_path) {
  const auto t0 = std::chrono::steady_clock::now();
  AppConfig cfg = load_app_config(args.config_path, args.profile);

  const auto dataset = load_dataset_csv(dataset_path);
  Rng rng(Rng::derive(args.seed, 0x0FF1));
  OfflineTrainReport report;
  const OfflineClassifier clf =
      train_offline_classifier(dataset, cfg.offline, rng, &report);
  save_classifier(clf, out_path);

  RunManifest manifest("train-offline", args.seed);
  manifest.set_config(cfg.effective);
  manifest.add_input(args.config_path);
  manifest.add_input(dataset_path);
  manifest.add_artifact(out_path);
  manifest.add_note("holdout_accuracy_pct", report.holdout_accuracy_pct);
  manifest.add_note("per_class_accuracy_pct",
                    vec_to_json(report.per_class_accuracy_pct));
  manifest.add_timing("total", seconds_since(t0));
  manifest.write(out_path + ".manifest.json");
  std::cout << "classifier written to " << out_path << " (holdout accuracy "
            << report.holdout_accuracy_pct << "%)\n";
  return 0;
}

int cmd_train_marl(const CommonArgs& args, const std::string& out_dir,
                   const std::string& warm_start_path, int iterations_override,
                   int train_batch_override) {
  const auto t0 = std::chrono::steady_clock::now();
  AppConfig cfg = load_app_config(args.config_path, args.profile);
  if (iterations_override >= 0) cfg.train.iterations = iterations_override;
  if (train_batch_override > 0) cfg.train.train_batch = train_batch_override;

  fs::create_directories(out_dir);
  const std::string predictor_path = out_dir + "/predictor.json";

  // The frozen predictor is trained first if the run directory has none.
  LstmPredictor predictor;
  if (fs::exists(predictor_path)) {
    predictor = load_predictor(predictor_path);
  } else {
    const auto corpus = simulate_benign_corpus(
        cfg.grid, cfg.predictor.episodes, cfg.env.init_disturbance,
        Rng::derive(args.seed, 0xBE11), args.threads);
    Rng rng(Rng::derive(args.seed, 0x9ED1));
    predictor = train_predictor(corpus, cfg.predictor, rng);
    save_predictor(predictor, predictor_path);
  }

  cfg.env.grid = &cfg.grid;
  cfg.env.predictor = &predictor;

  std::optional<OfflineClassifier> warm;
  if (!warm_start_path.empty()) warm = load_classifier(warm_start_path);

  const MarlResult result =
      train_marl(cfg.env, cfg.train, warm ? &*warm : nullptr, args.seed,
                 args.threads);

  const std::string prefix = warm ? "tf_marl" : "marl";
  const std::string adv_path = out_dir + "/" + prefix + "_adversary.json";
  const std::string def_path = out_dir + "/" + prefix + "_defender.json";
  const std::string hist_path = out_dir + "/" + prefix + "_history.csv";
  save_policy(result.adversary, adv_path);
  save_policy(result.defender, def_path);
  save_history_csv(result.history, hist_path);

  RunManifest manifest("train-marl", args.seed);
  manifest.set_config(cfg.effective);
  manifest.add_input(args.config_path);
  if (!warm_start_path.empty()) manifest.add_input(warm_start_path);
  manifest.add_artifact(predictor_path);
  manifest.add_artifact(adv_path);
  manifest.add_artifact(def_path);
  manifest.add_artifact(hist_path);
  if (!result.history.empty()) {
    manifest.add_note("final_adversary_reward", result.history.back().adversary_reward);
    manifest.add_note("final_defender_reward", result.history.back().defender_reward);
  }
  manifest.add_timing("total", seconds_since(t0));
  manifest.write(out_dir + "/" + prefix + ".manifest.json");
  std::cout << (warm ? "TF-MARL" : "MARL") << " checkpoints written to "
            << out_dir << "\n";
  return 0;
}

DefenderFn load_defender(const std::string& path) {
  const Json j = load_json_file(path);
  const std::string kind = j.value("kind", "");
  if (kind == "policy") return policy_defender(load_policy(path));
  if (kind == "offline_classifier") return classifier_defender(load_classifier(path));
  throw ConfigError(path + ": expected a policy or offline_classifier artifact");
}

int cmd_evaluate(const CommonArgs& args, const std::string& defender_path,
                 const std::string& attacker_path, int time_invariant_bus,
                 bool time_invariant_all, bool no_attack, bool oracle_self_test,
                 int episodes, const std::string& out_prefix,
                 bool export_traces) {
  const auto t0 = std::chrono::steady_clock::now();
  AppConfig cfg = load_app_config(args.config_path, args.profile);

  // The evaluation environment needs the predictor that the defender was
  // trained against; it travels next to policy checkpoints, so accept
  // either an explicit file or a sibling of the defender artifact.
  std::string predictor_path;
  if (const char* env_path = std::getenv("FDIA_PREDICTOR")) {
    predictor_path = env_path;
  } else {
    predictor_path =
        (fs::path(defender_path).parent_path() / "predictor.json").string();
  }
  if (!fs::exists(predictor_path)) {
    throw ConfigError("predictor artifact not found at " + predictor_path +
                      " (set FDIA_PREDICTOR or co-locate predictor.json)");
  }
  const LstmPredictor predictor = load_predictor(predictor_path);
  cfg.env.grid = &cfg.grid;
  cfg.env.predictor = &predictor;

  const DefenderFn defender = oracle_self_test
                                  ? always_no_attack_defender()
                                  : load_defender(defender_path);

  EvalOptions opts;
  opts.episodes = episodes;
  opts.seed = args.seed;
  opts.threads = args.threads;
  opts.oracle_defender = oracle_self_test;
  if (export_traces) {
    opts.trace_dir = out_prefix + "_traces";
    fs::create_directories(opts.trace_dir);
  }

  RunManifest manifest("evaluate", args.seed);
  manifest.set_config(cfg.effective);
  manifest.add_input(args.config_path);
  manifest.add_input(predictor_path);
  if (!oracle_self_test) manifest.add_input(defender_path);

  Json results = Json::object();
  std::string text;
  if (time_invariant_all) {
    // Per-bus sweep, 20 episodes each.
    Json sweeps = Json::array();
    std::ostringstream table;
    table << "time-invariant sweep (20 episodes per bus)\n  bus   acc%\n";
    EvalOptions sweep_opts = opts;
    sweep_opts.episodes = 20;
    for (int bus = 0; bus < cfg.grid.n_buses; ++bus) {
      sweep_opts.seed = Rng::derive(args.seed, static_cast<std::uint64_t>(bus));
      const EvalReport r = evaluate_defender(cfg.env, defender,
                                             time_invariant_attack(bus), sweep_opts);
      Json row;
      row["bus"] = bus;
      row["accuracy_pct"] = r.accuracy_pct;
      row["total_deviation"] = r.total_deviation;
      sweeps.push_back(std::move(row));
      table << std::setw(5) << bus << std::setw(8) << std::fixed
            << std::setprecision(2) << r.accuracy_pct << '\n';
    }
    results["time_invariant_sweep"] = std::move(sweeps);
    text = table.str();
  } else {
    AttackerFn attacker;
    if (no_attack) {
      attacker = scripted_no_attack();
    } else if (time_invariant_bus >= 0) {
      attacker = time_invariant_attack(time_invariant_bus);
    } else if (!attacker_path.empty()) {
      attacker = policy_attacker(load_policy(attacker_path));
      manifest.add_input(attacker_path);
    } else {
      throw ConfigError(
          "evaluate: provide --attacker, --time-invariant, or --no-attack");
    }
    const EvalReport report = evaluate_defender(cfg.env, defender, attacker, opts);
    results = report.to_json();
    text = report.to_text();
  }

  const std::string json_path = out_prefix + ".json";
  const std::string text_path = out_prefix + ".txt";
  save_json_file(results, json_path);
  {
    std::ofstream out(text_path);
    if (!out) throw ConfigError("cannot write file: " + text_path);
    out << text;
  }
  manifest.add_artifact(json_path);
  manifest.add_artifact(text_path);
  manifest.add_timing("total", seconds_since(t0));
  manifest.write(out_prefix + ".manifest.json");
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial droop-tampering sandbox: swing-equation "
               "simulation, residual-based detection, and two-agent PPO"};
  app.require_subcommand(1);

  CommonArgs args;

  auto* tp = app.add_subcommand("train-predictor",
                                "Train the one-step state predictor");
  std::string tp_out = "predictor.json";
  add_common(tp, args);
  tp->add_option("--out", tp_out, "Output model file");

  auto* gd = app.add_subcommand("gen-offline-data",
                                "Generate the synthetic FDIA window dataset");
  std::string gd_predictor;
  std::string gd_out = "offline_data.csv";
  int gd_episodes = -1;
  add_common(gd, args);
  gd->add_option("--predictor", gd_predictor, "Trained predictor artifact")
      ->required();
  gd->add_option("--out", gd_out, "Output dataset CSV");
  gd->add_option("--episodes", gd_episodes, "Episodes per T_a value override");

  auto* to = app.add_subcommand("train-offline",
                                "Train the supervised residual classifier");
  std::string to_dataset;
  std::string to_out = "offline_classifier.json";
  add_common(to, args);
  to->add_option("--dataset", to_dataset, "Dataset CSV")->required();
  to->add_option("--out", to_out, "Output classifier file");

  auto* tm = app.add_subcommand("train-marl",
                                "Concurrently train adversary and defender");
  std::string tm_out = "marl_run";
  std::string tm_warm;
  int tm_iterations = -1;
  int tm_train_batch = -1;
  add_common(tm, args);
  tm->add_option("--out-dir", tm_out, "Output directory");
  tm->add_option("--warm-start", tm_warm,
                 "Offline classifier used to initialize the defender");
  tm->add_option("--iterations", tm_iterations, "Training iterations override");
  tm->add_option("--train-batch", tm_train_batch, "Train batch size override");
  tm->add_option("--profile", args.profile, "Scale profile: desk or paper")
      ->default_val("desk");

  auto* ev = app.add_subcommand("evaluate", "Evaluate a defender");
  std::string ev_defender;
  std::string ev_attacker;
  int ev_ti_bus = -1;
  bool ev_ti_all = false;
  bool ev_no_attack = false;
  bool ev_oracle = false;
  bool ev_traces = false;
  int ev_episodes = 100;
  std::string ev_out = "eval_report";
  add_common(ev, args);
  ev->add_option("--defender", ev_defender,
                 "Defender artifact (policy or offline classifier)");
  ev->add_option("--attacker", ev_attacker, "Adversary policy artifact");
  ev->add_option("--time-invariant", ev_ti_bus,
                 "Scripted time-invariant attack on one bus");
  ev->add_flag("--time-invariant-sweep", ev_ti_all,
               "Per-bus time-invariant sweep (20 episodes per bus)");
  ev->add_flag("--no-attack", ev_no_attack, "Scripted benign adversary");
  ev->add_flag("--oracle-self-test", ev_oracle,
               "Replace the defender with the window-label oracle");
  ev->add_flag("--export-traces", ev_traces, "Write per-episode CSV traces");
  ev->add_option("--episodes", ev_episodes, "Evaluation episodes");
  ev->add_option("--out", ev_out, "Output file prefix");

  try {
    app.parse(argc, argv);
    if (tp->parsed()) return cmd_train_predictor(args, tp_out);
    if (gd->parsed()) return cmd_gen_offline_data(args, gd_predictor, gd_out, gd_episodes);
    if (to->parsed()) return cmd_train_offline(args, to_dataset, to_out);
    if (tm->parsed()) {
      return cmd_train_marl(args, tm_out, tm_warm, tm_iterations, tm_train_batch);
    }
    if (ev->parsed()) {
      if (!ev_oracle && ev_defender.empty()) {
        throw fdia::ConfigError("evaluate: --defender is required");
      }
      return cmd_evaluate(args, ev_defender, ev_attacker, ev_ti_bus, ev_ti_all,
                          ev_no_attack, ev_oracle, ev_episodes, ev_out, ev_traces);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const fdia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const fdia::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
