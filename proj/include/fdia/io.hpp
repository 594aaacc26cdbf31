#pragma once

#include "fdia/common.hpp"
#include "fdia/grid.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace fdia {

using Json = nlohmann::json;

Json load_json_file(const std::string& path);
void save_json_file(const Json& j, const std::string& path);

Json vec_to_json(const Vec& v);
Vec vec_from_json(const Json& j, const char* name);
Json mat_to_json(const Mat& m);  // row-major nested arrays
Mat mat_from_json(const Json& j, const char* name);

// Grid section of a config file. `injection` is derived from the
// equilibrium angles, never read from the file.
GridParams grid_from_json(const Json& grid);
Json grid_to_json(const GridParams& params);

// Loads the "grid" section of a config file and validates it.
GridParams load_grid_config(const std::string& path);

// FNV-1a 64-bit over the raw bytes of a file; used for manifest identity.
std::uint64_t fnv1a64_file(const std::string& path);
std::string hash_hex(std::uint64_t h);

// Shortest round-trip decimal formatting, for CSV export.
std::string format_double(double x);

// Per-command run record: effective config, seed, input/artifact hashes,
// wall-clock timings. Written next to the artifacts it describes.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);
  void set_config(const Json& effective_config);
  void add_input(const std::string& path);
  void add_artifact(const std::string& path);
  void add_timing(const std::string& name, double seconds);
  void add_note(const std::string& key, const Json& value);
  // Hashes artifacts and writes the manifest JSON.
  void write(const std::string& path) const;

 private:
  Json j_;
};

}  // namespace fdia
