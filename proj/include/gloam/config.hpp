// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "gloam/evaluation.hpp"
#include "gloam/odometry.hpp"
#include "gloam/training.hpp"

namespace gloam {

// Flat "section.key" -> value map parsed from an ini-style file:
// [section] headers, key = value lines, # and ; comments.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::string& path);

// Sections in order, keys sorted; parse_config_text round-trips it.
std::string serialize_config(const ConfigMap& map);
void write_config_file(const ConfigMap& map, const std::string& path);

std::string config_get(const ConfigMap& map, const std::string& key,
                       const std::string& fallback);
double config_get_double(const ConfigMap& map, const std::string& key,
                         double fallback);
int config_get_int(const ConfigMap& map, const std::string& key, int fallback);
bool config_get_bool(const ConfigMap& map, const std::string& key,
                     bool fallback);

// Missing keys keep their struct defaults; weight contents are not part of
// the map (they live in weight files).
OdometryConfig odometry_config_from_map(const ConfigMap& map);
ConfigMap odometry_config_to_map(const OdometryConfig& cfg);

TpeConfig tpe_config_from_map(const ConfigMap& map);
ConfigMap tpe_config_to_map(const TpeConfig& cfg);

RteOptions rte_options_from_map(const ConfigMap& map, const std::string& section);
void rte_options_to_map(const RteOptions& options, const std::string& section,
                        ConfigMap& map);

}  // namespace gloam
