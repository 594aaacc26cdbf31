#include "fdia/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fdia {

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void save_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j, const char* name) {
  if (!j.is_array()) throw ConfigError(std::string(name) + " must be an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(std::string(name) + " must be numeric");
    v[i++] = x.get<double>();
  }
  return v;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const Json& j, const char* name) {
  if (!j.is_array() || j.empty()) {
    throw ConfigError(std::string(name) + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Mat m(rows, cols);
  Eigen::Index i = 0;
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(std::string(name) + " rows must have equal length");
    }
    Eigen::Index k = 0;
    for (const auto& x : row) m(i, k++) = x.get<double>();
    ++i;
  }
  return m;
}

GridParams grid_from_json(const Json& grid) {
  GridParams p;
  try {
    p.n_buses = grid.at("n_buses").get<int>();
    p.inertia = vec_from_json(grid.at("inertia"), "grid.inertia");
    p.damping = vec_from_json(grid.at("damping"), "grid.damping");
    p.susceptance = mat_from_json(grid.at("susceptance"), "grid.susceptance");
    p.droop_ref = vec_from_json(grid.at("droop_ref"), "grid.droop_ref");
    p.equilibrium_theta =
        vec_from_json(grid.at("equilibrium_theta"), "grid.equilibrium_theta");
    p.dt = grid.at("dt").get<double>();
    p.t_f = grid.at("t_f").get<double>();
  } catch (const Json::out_of_range& e) {
    throw ConfigError(std::string("grid config missing key: ") + e.what());
  }
  if (!(p.dt > 0.0)) throw ConfigError("grid: dt must be positive");
  p.steps = static_cast<int>(std::llround(p.t_f / p.dt));
  // Equilibrium consistency by construction.
  p.injection = coupling_power(p.susceptance, p.equilibrium_theta);
  p.validate();
  return p;
}

Json grid_to_json(const GridParams& p) {
  Json g;
  g["n_buses"] = p.n_buses;
  g["inertia"] = vec_to_json(p.inertia);
  g["damping"] = vec_to_json(p.damping);
  g["susceptance"] = mat_to_json(p.susceptance);
  g["droop_ref"] = vec_to_json(p.droop_ref);
  g["equilibrium_theta"] = vec_to_json(p.equilibrium_theta);
  g["dt"] = p.dt;
  g["t_f"] = p.t_f;
  return g;
}

GridParams load_grid_config(const std::string& path) {
  const Json j = load_json_file(path);
  if (!j.contains("grid")) throw ConfigError("config " + path + " has no \"grid\" section");
  return grid_from_json(j.at("grid"));
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file for hashing: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  std::array<char, 65536> buf;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

std::string format_double(double x) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

RunManifest::RunManifest(std::string command, std::uint64_t seed) {
  j_["command"] = std::move(command);
  j_["seed"] = seed;
  j_["inputs"] = Json::object();
  j_["artifacts"] = Json::object();
  j_["timings_s"] = Json::object();
}

void RunManifest::set_config(const Json& effective_config) {
  j_["config"] = effective_config;
}

void RunManifest::add_input(const std::string& path) {
  j_["inputs"][path] = hash_hex(fnv1a64_file(path));
}

void RunManifest::add_artifact(const std::string& path) {
  j_["artifacts"][path] = Json();  // hashed at write time
}

void RunManifest::add_timing(const std::string& name, double seconds) {
  j_["timings_s"][name] = seconds;
}

void RunManifest::add_note(const std::string& key, const Json& value) {
  j_[key] = value;
}

void RunManifest::write(const std::string& path) const {
  Json out = j_;
  for (auto& [artifact, hash] : out["artifacts"].items()) {
    hash = hash_hex(fnv1a64_file(artifact));
  }
  save_json_file(out, path);
}

}  // namespace fdia
