#pragma once

#include "fdia/env.hpp"
#include "fdia/io.hpp"
#include "fdia/offline.hpp"
#include "fdia/ppo.hpp"
#include "fdia/predictor.hpp"

#include <string>

namespace fdia {

// Parsed configuration file. Env-level values shared by several stages
// (window d, residual scale c_w, initial disturbance) live in the "env"
// section and are propagated into the stage configs here, so the file has
// a single source of truth for each.
struct AppConfig {
  Json effective;  // defaults merged with the file, for manifests
  GridParams grid;
  EnvConfig env;   // grid/predictor pointers left null; bind at use site
  PredictorTrainConfig predictor;
  OfflineTrainConfig offline;
  TrainConfig train;
  std::string profile = "desk";
};

// Loads a config file and resolves the training profile ("desk" or
// "paper"). Unknown profile names are a ConfigError.
AppConfig load_app_config(const std::string& path, const std::string& profile);

}  // namespace fdia
