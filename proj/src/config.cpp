// SPDX-License-Identifier: Apache-2.0
#include "gloam/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gloam {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string lengths_to_string(const std::vector<double>& lengths) {
  std::string out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (i) out += ",";
    out += format_double(lengths[i]);
  }
  return out;
}

std::vector<double> lengths_from_string(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw std::invalid_argument("empty length list");
  return out;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error("config line " + std::to_string(line_number) +
                                 ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw std::runtime_error("config line " + std::to_string(line_number) +
                                 ": empty section name");
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_number) +
                               ": empty key");
    }
    map[section.empty() ? key : section + "." + key] = value;
  }
  return map;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string serialize_config(const ConfigMap& map) {
  // Bare keys must precede every section header or they would re-parse
  // inside the last section; std::map keeps sections grouped and sorted.
  std::string out;
  for (const auto& [key, value] : map) {
    if (key.find('.') == std::string::npos) out += key + " = " + value + "\n";
  }
  std::string current_section;
  for (const auto& [key, value] : map) {
    const std::size_t dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (section != current_section) {
      if (!out.empty()) out += "\n";
      out += "[" + section + "]\n";
      current_section = section;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

void write_config_file(const ConfigMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << serialize_config(map);
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string config_get(const ConfigMap& map, const std::string& key,
                       const std::string& fallback) {
  const auto it = map.find(key);
  return it == map.end() ? fallback : it->second;
}

double config_get_double(const ConfigMap& map, const std::string& key,
                         double fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not a number: " +
                             it->second);
  }
}

int config_get_int(const ConfigMap& map, const std::string& key, int fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  try {
    std::size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config key " + key + ": not an integer: " +
                             it->second);
  }
}

bool config_get_bool(const ConfigMap& map, const std::string& key,
                     bool fallback) {
  const auto it = map.find(key);
  if (it == map.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw std::runtime_error("config key " + key + ": not a boolean: " + v);
}

OdometryConfig odometry_config_from_map(const ConfigMap& map) {
  OdometryConfig cfg;
  RegistrationConfig& reg = cfg.registration;
  reg.association = association_mode_from_string(
      config_get(map, "registration.association", to_string(reg.association)));
  reg.covariance = covariance_mode_from_string(
      config_get(map, "registration.covariance", to_string(reg.covariance)));
  reg.covariance_neighbors = config_get_int(map, "registration.covariance_neighbors",
                                            reg.covariance_neighbors);
  reg.eigenvalue_floor =
      config_get_double(map, "registration.eigenvalue_floor", reg.eigenvalue_floor);
  reg.max_correspondence_distance =
      config_get_double(map, "registration.max_correspondence_distance",
                        reg.max_correspondence_distance);
  reg.lm_max_inner_iterations = config_get_int(
      map, "registration.lm_max_inner_iterations", reg.lm_max_inner_iterations);
  reg.max_outer_iterations = config_get_int(map, "registration.max_outer_iterations",
                                            reg.max_outer_iterations);
  reg.convergence_tolerance = config_get_double(
      map, "registration.convergence_tolerance", reg.convergence_tolerance);
  reg.lm_initial_lambda =
      config_get_double(map, "registration.lm_initial_lambda", reg.lm_initial_lambda);
  reg.lm_lambda_scale =
      config_get_double(map, "registration.lm_lambda_scale", reg.lm_lambda_scale);

  cfg.voxel_leaf = config_get_double(map, "cloud.voxel_leaf", cfg.voxel_leaf);
  cfg.range_gate.min_range =
      config_get_double(map, "cloud.min_range", cfg.range_gate.min_range);
  cfg.range_gate.max_range =
      config_get_double(map, "cloud.max_range", cfg.range_gate.max_range);

  cfg.backbone = feature_backbone_from_string(
      config_get(map, "features.backbone", to_string(cfg.backbone)));
  cfg.external_feature_dir =
      config_get(map, "features.external_dir", cfg.external_feature_dir);
  cfg.descriptor_neighbors =
      config_get_int(map, "features.neighbors", cfg.descriptor_neighbors);
  cfg.pca_max_samples =
      config_get_int(map, "features.pca_max_samples", cfg.pca_max_samples);

  cfg.prior = motion_prior_from_string(
      config_get(map, "odometry.motion_prior", to_string(cfg.prior)));
  cfg.max_consecutive_failures = config_get_int(
      map, "odometry.max_consecutive_failures", cfg.max_consecutive_failures);
  return cfg;
}

ConfigMap odometry_config_to_map(const OdometryConfig& cfg) {
  ConfigMap map;
  const RegistrationConfig& reg = cfg.registration;
  map["registration.association"] = to_string(reg.association);
  map["registration.covariance"] = to_string(reg.covariance);
  map["registration.covariance_neighbors"] = std::to_string(reg.covariance_neighbors);
  map["registration.eigenvalue_floor"] = format_double(reg.eigenvalue_floor);
  map["registration.max_correspondence_distance"] =
      format_double(reg.max_correspondence_distance);
  map["registration.lm_max_inner_iterations"] =
      std::to_string(reg.lm_max_inner_iterations);
  map["registration.max_outer_iterations"] = std::to_string(reg.max_outer_iterations);
  map["registration.convergence_tolerance"] = format_double(reg.convergence_tolerance);
  map["registration.lm_initial_lambda"] = format_double(reg.lm_initial_lambda);
  map["registration.lm_lambda_scale"] = format_double(reg.lm_lambda_scale);

  map["cloud.voxel_leaf"] = format_double(cfg.voxel_leaf);
  map["cloud.min_range"] = format_double(cfg.range_gate.min_range);
  map["cloud.max_range"] = format_double(cfg.range_gate.max_range);

  map["features.backbone"] = to_string(cfg.backbone);
  if (!cfg.external_feature_dir.empty()) {
    map["features.external_dir"] = cfg.external_feature_dir;
  }
  map["features.neighbors"] = std::to_string(cfg.descriptor_neighbors);
  map["features.pca_max_samples"] = std::to_string(cfg.pca_max_samples);

  map["odometry.motion_prior"] = to_string(cfg.prior);
  map["odometry.max_consecutive_failures"] =
      std::to_string(cfg.max_consecutive_failures);
  return map;
}

TpeConfig tpe_config_from_map(const ConfigMap& map) {
  TpeConfig cfg;
  cfg.lower = config_get_double(map, "training.lower", cfg.lower);
  cfg.upper = config_get_double(map, "training.upper", cfg.upper);
  cfg.startup_trials =
      config_get_int(map, "training.startup_trials", cfg.startup_trials);
  cfg.gamma = config_get_double(map, "training.gamma", cfg.gamma);
  cfg.candidates = config_get_int(map, "training.candidates", cfg.candidates);
  cfg.min_bandwidth =
      config_get_double(map, "training.min_bandwidth", cfg.min_bandwidth);
  cfg.budget = config_get_int(map, "training.budget", cfg.budget);
  cfg.parallelism = config_get_int(map, "training.parallelism", cfg.parallelism);
  cfg.include_zero_baseline = config_get_bool(map, "training.include_zero_baseline",
                                              cfg.include_zero_baseline);
  return cfg;
}

ConfigMap tpe_config_to_map(const TpeConfig& cfg) {
  ConfigMap map;
  map["training.lower"] = format_double(cfg.lower);
  map["training.upper"] = format_double(cfg.upper);
  map["training.startup_trials"] = std::to_string(cfg.startup_trials);
  map["training.gamma"] = format_double(cfg.gamma);
  map["training.candidates"] = std::to_string(cfg.candidates);
  map["training.min_bandwidth"] = format_double(cfg.min_bandwidth);
  map["training.budget"] = std::to_string(cfg.budget);
  map["training.parallelism"] = std::to_string(cfg.parallelism);
  map["training.include_zero_baseline"] =
      cfg.include_zero_baseline ? "true" : "false";
  return map;
}

RteOptions rte_options_from_map(const ConfigMap& map,
                                const std::string& section) {
  RteOptions options;
  const auto it = map.find(section + ".lengths");
  if (it != map.end()) options.lengths = lengths_from_string(it->second);
  options.start_stride =
      config_get_int(map, section + ".start_stride", options.start_stride);
  return options;
}

void rte_options_to_map(const RteOptions& options, const std::string& section,
                        ConfigMap& map) {
  map[section + ".lengths"] = lengths_to_string(options.lengths);
  map[section + ".start_stride"] = std::to_string(options.start_stride);
}

}  // namespace gloam
