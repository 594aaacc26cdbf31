#include "fdia/config.hpp"

namespace fdia {

namespace {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

Json section(const Json& j, const char* key) {
  return j.is_object() && j.contains(key) ? j.at(key) : Json::object();
}

}  // namespace

AppConfig load_app_config(const std::string& path, const std::string& profile) {
  const Json file = load_json_file(path);
  if (!file.contains("grid")) {
    throw ConfigError("config " + path + " has no \"grid\" section");
  }

  AppConfig cfg;
  cfg.grid = grid_from_json(file.at("grid"));

  const Json env = section(file, "env");
  cfg.env.window = get_or(env, "window", 6);
  cfg.env.reward_scale = get_or(env, "reward_scale", 0.1);
  cfg.env.detect_reward = get_or(env, "detect_reward", 0.1);
  cfg.env.capture_penalty = get_or(env, "capture_penalty", -0.1);
  cfg.env.residual_scale = get_or(env, "residual_scale", 100.0);
  cfg.env.init_disturbance = get_or(env, "init_disturbance", 0.2);
  cfg.env.truncate_on_divergence = get_or(env, "truncate_on_divergence", false);
  cfg.env.divergence_reward = get_or(env, "divergence_reward", -10.0);

  const Json pred = section(file, "predictor");
  cfg.predictor.hidden = get_or(pred, "hidden", 100);
  cfg.predictor.window = cfg.env.window;
  cfg.predictor.episodes = get_or(pred, "episodes", 500);
  cfg.predictor.windows_per_episode = get_or(pred, "windows_per_episode", 40);
  cfg.predictor.epochs = get_or(pred, "epochs", 30);
  cfg.predictor.minibatch = get_or(pred, "minibatch", 128);
  cfg.predictor.learning_rate = get_or(pred, "learning_rate", 1e-3);
  cfg.predictor.holdout_fraction = get_or(pred, "holdout_fraction", 0.2);

  const Json off = section(file, "offline");
  cfg.offline.ta_set =
      get_or(off, "ta_set", std::vector<double>{0.16, 0.2, 0.4, 0.6, 0.8});
  cfg.offline.episodes = get_or(off, "episodes", 100);
  cfg.offline.window = cfg.env.window;
  cfg.offline.residual_scale = cfg.env.residual_scale;
  cfg.offline.init_disturbance = cfg.env.init_disturbance;
  cfg.offline.hidden = get_or(off, "hidden", 256);
  cfg.offline.epochs = get_or(off, "epochs", 50);
  cfg.offline.minibatch = get_or(off, "minibatch", 128);
  cfg.offline.learning_rate = get_or(off, "learning_rate", 1e-3);
  cfg.offline.holdout_fraction = get_or(off, "holdout_fraction", 0.2);

  const Json train = section(file, "train");
  cfg.train.learning_rate = get_or(train, "learning_rate", 1e-4);
  cfg.train.clip_range = get_or(train, "clip_range", 0.2);
  cfg.train.entropy_coef = get_or(train, "entropy_coef", 0.01);
  cfg.train.value_coef = get_or(train, "value_coef", 0.5);
  cfg.train.gamma = get_or(train, "gamma", 0.99);
  cfg.train.gae_lambda = get_or(train, "gae_lambda", 0.95);
  cfg.train.ppo_epochs = get_or(train, "ppo_epochs", 10);
  cfg.train.minibatch = get_or(train, "minibatch", 128);
  cfg.train.rollout_fragment = get_or(train, "rollout_fragment", cfg.grid.steps);

  cfg.profile = profile;
  if (profile == "desk") {
    const Json p = section(train, "desk");
    cfg.train.train_batch = get_or(p, "train_batch", 10000);
    cfg.train.iterations = get_or(p, "iterations", 200);
  } else if (profile == "paper") {
    const Json p = section(train, "paper");
    cfg.train.train_batch = get_or(p, "train_batch", 100000);
    cfg.train.iterations = get_or(p, "iterations", 400);
  } else {
    throw ConfigError("unknown training profile: " + profile +
                      " (expected desk or paper)");
  }

  // Effective config snapshot for manifests.
  cfg.effective["grid"] = grid_to_json(cfg.grid);
  cfg.effective["env"] = {
      {"window", cfg.env.window},
      {"reward_scale", cfg.env.reward_scale},
      {"detect_reward", cfg.env.detect_reward},
      {"capture_penalty", cfg.env.capture_penalty},
      {"residual_scale", cfg.env.residual_scale},
      {"init_disturbance", cfg.env.init_disturbance},
      {"truncate_on_divergence", cfg.env.truncate_on_divergence},
      {"divergence_reward", cfg.env.divergence_reward},
  };
  cfg.effective["predictor"] = {
      {"hidden", cfg.predictor.hidden},
      {"window", cfg.predictor.window},
      {"episodes", cfg.predictor.episodes},
      {"windows_per_episode", cfg.predictor.windows_per_episode},
      {"epochs", cfg.predictor.epochs},
      {"minibatch", cfg.predictor.minibatch},
      {"learning_rate", cfg.predictor.learning_rate},
      {"holdout_fraction", cfg.predictor.holdout_fraction},
  };
  cfg.effective["offline"] = {
      {"ta_set", cfg.offline.ta_set},
      {"episodes", cfg.offline.episodes},
      {"hidden", cfg.offline.hidden},
      {"epochs", cfg.offline.epochs},
      {"minibatch", cfg.offline.minibatch},
      {"learning_rate", cfg.offline.learning_rate},
      {"holdout_fraction", cfg.offline.holdout_fraction},
  };
  cfg.effective["train"] = {
      {"profile", cfg.profile},
      {"learning_rate", cfg.train.learning_rate},
      {"clip_range", cfg.train.clip_range},
      {"entropy_coef", cfg.train.entropy_coef},
      {"value_coef", cfg.train.value_coef},
      {"gamma", cfg.train.gamma},
      {"gae_lambda", cfg.train.gae_lambda},
      {"ppo_epochs", cfg.train.ppo_epochs},
      {"minibatch", cfg.train.minibatch},
      {"rollout_fragment", cfg.train.rollout_fragment},
      {"train_batch", cfg.train.train_batch},
      {"iterations", cfg.train.iterations},
  };
  return cfg;
}

}  // namespace fdia
