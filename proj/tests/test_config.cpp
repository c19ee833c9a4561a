// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "gloam/config.hpp"

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / ("gloam_config_" + leaf);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_config_text handles sections, comments, and whitespace") {
  const std::string text =
      "# leading comment\n"
      "bare = 1\n"
      "\n"
      "[registration]\n"
      "  association = euclidean   ; trailing comment\n"
      "max_outer_iterations=25\n"
      "\n"
      "[cloud]\n"
      "voxel_leaf = 0.25 # meters\n"
      "voxel_leaf = 0.5\n";
  const gloam::ConfigMap map = gloam::parse_config_text(text);
  REQUIRE(map.size() == 4);
  CHECK(map.at("bare") == "1");
  CHECK(map.at("registration.association") == "euclidean");
  CHECK(map.at("registration.max_outer_iterations") == "25");
  // Later assignments win.
  CHECK(map.at("cloud.voxel_leaf") == "0.5");
}

TEST_CASE("parse_config_text reports the offending line") {
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("a = 1\n[broken\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("a = 1\n[broken\n"),
                       doctest::Contains("unterminated section header"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("[]\n"),
                       doctest::Contains("empty section name"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("\n\njust words\n"),
                       doctest::Contains("line 3"), std::runtime_error);
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("just words\n"),
                       doctest::Contains("expected key = value"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS((void)gloam::parse_config_text("= value\n"),
                       doctest::Contains("empty key"), std::runtime_error);
}

TEST_CASE("serialize_config round-trips through the parser") {
  gloam::ConfigMap map;
  map["zebra"] = "last-bare";
  map["alpha.k"] = "1";
  map["alpha.m"] = "two words";
  map["beta.k"] = "3.5";
  map["anchor"] = "first-bare";

  const std::string text = gloam::serialize_config(map);
  const gloam::ConfigMap back = gloam::parse_config_text(text);
  CHECK(back == map);

  // Bare keys come before any section header.
  CHECK(text.find("zebra") < text.find('['));
  // Sections appear once, in sorted order.
  CHECK(text.find("[alpha]") != std::string::npos);
  CHECK(text.find("[alpha]") < text.find("[beta]"));
  CHECK(text.find("[alpha]") == text.rfind("[alpha]"));
}

TEST_CASE("config files round-trip on disk") {
  const fs::path dir = temp_dir("file");
  const fs::path path = dir / "settings.ini";

  gloam::ConfigMap map;
  map["odometry.motion_prior"] = "constant_velocity";
  map["cloud.voxel_leaf"] = "0.25";
  gloam::write_config_file(map, path.string());
  CHECK(gloam::read_config_file(path.string()) == map);

  CHECK_THROWS_WITH_AS((void)gloam::read_config_file((dir / "nope.ini").string()),
                       doctest::Contains("cannot open"), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("typed getters fall back and reject malformed values") {
  gloam::ConfigMap map;
  map["a.d"] = "2.5";
  map["a.i"] = "42";
  map["a.b1"] = "true";
  map["a.b2"] = "no";
  map["a.b3"] = "1";
  map["a.junk"] = "12x";
  map["a.float_int"] = "7.5";
  map["a.maybe"] = "probably";

  CHECK(gloam::config_get(map, "a.d", "zzz") == "2.5");
  CHECK(gloam::config_get(map, "missing", "zzz") == "zzz");

  CHECK(gloam::config_get_double(map, "a.d", 0.0) == 2.5);
  CHECK(gloam::config_get_double(map, "missing", -1.5) == -1.5);
  CHECK_THROWS_WITH_AS((void)gloam::config_get_double(map, "a.junk", 0.0),
                       doctest::Contains("a.junk"), std::runtime_error);

  CHECK(gloam::config_get_int(map, "a.i", 0) == 42);
  CHECK(gloam::config_get_int(map, "missing", 7) == 7);
  CHECK_THROWS_WITH_AS((void)gloam::config_get_int(map, "a.float_int", 0),
                       doctest::Contains("not an integer"), std::runtime_error);

  CHECK(gloam::config_get_bool(map, "a.b1", false));
  CHECK_FALSE(gloam::config_get_bool(map, "a.b2", true));
  CHECK(gloam::config_get_bool(map, "a.b3", false));
  CHECK(gloam::config_get_bool(map, "missing", true));
  CHECK_THROWS_WITH_AS((void)gloam::config_get_bool(map, "a.maybe", false),
                       doctest::Contains("not a boolean"), std::runtime_error);
}

TEST_CASE("odometry config round-trips through the map form") {
  gloam::OdometryConfig cfg;
  cfg.registration.association = gloam::AssociationMode::kFeatureExtended;
  cfg.registration.covariance = gloam::CovarianceMode::kLearned;
  cfg.registration.covariance_neighbors = 17;
  cfg.registration.eigenvalue_floor = 2.5e-3;
  cfg.registration.max_correspondence_distance = 1.75;
  cfg.registration.lm_max_inner_iterations = 9;
  cfg.registration.max_outer_iterations = 33;
  cfg.registration.convergence_tolerance = 1e-7;
  cfg.registration.lm_initial_lambda = 1e-5;
  cfg.registration.lm_lambda_scale = 8.0;
  cfg.voxel_leaf = 0.4;
  cfg.range_gate.min_range = 1.5;
  cfg.range_gate.max_range = 55.0;
  cfg.backbone = gloam::FeatureBackbone::kExternal;
  cfg.external_feature_dir = "/tmp/features";
  cfg.descriptor_neighbors = 12;
  cfg.pca_max_samples = 5000;
  cfg.prior = gloam::MotionPrior::kIdentity;
  cfg.max_consecutive_failures = 5;

  const gloam::ConfigMap map = gloam::odometry_config_to_map(cfg);
  const gloam::OdometryConfig back = gloam::odometry_config_from_map(map);
  CHECK(back.registration.association == cfg.registration.association);
  CHECK(back.registration.covariance == cfg.registration.covariance);
  CHECK(back.registration.covariance_neighbors ==
        cfg.registration.covariance_neighbors);
  CHECK(back.registration.eigenvalue_floor == cfg.registration.eigenvalue_floor);
  CHECK(back.registration.max_correspondence_distance ==
        cfg.registration.max_correspondence_distance);
  CHECK(back.registration.lm_max_inner_iterations ==
        cfg.registration.lm_max_inner_iterations);
  CHECK(back.registration.max_outer_iterations ==
        cfg.registration.max_outer_iterations);
  CHECK(back.registration.convergence_tolerance ==
        cfg.registration.convergence_tolerance);
  CHECK(back.registration.lm_initial_lambda == cfg.registration.lm_initial_lambda);
  CHECK(back.registration.lm_lambda_scale == cfg.registration.lm_lambda_scale);
  CHECK(back.voxel_leaf == cfg.voxel_leaf);
  CHECK(back.range_gate.min_range == cfg.range_gate.min_range);
  CHECK(back.range_gate.max_range == cfg.range_gate.max_range);
  CHECK(back.backbone == cfg.backbone);
  CHECK(back.external_feature_dir == cfg.external_feature_dir);
  CHECK(back.descriptor_neighbors == cfg.descriptor_neighbors);
  CHECK(back.pca_max_samples == cfg.pca_max_samples);
  CHECK(back.prior == cfg.prior);
  CHECK(back.max_consecutive_failures == cfg.max_consecutive_failures);

  // Missing keys keep their struct defaults.
  const gloam::OdometryConfig defaults =
      gloam::odometry_config_from_map(gloam::ConfigMap{});
  CHECK(defaults.registration.association == gloam::AssociationMode::kEuclidean);
  CHECK(defaults.voxel_leaf == gloam::OdometryConfig{}.voxel_leaf);

  gloam::ConfigMap bad;
  bad["registration.association"] = "psychic";
  CHECK_THROWS_AS((void)gloam::odometry_config_from_map(bad),
                  std::invalid_argument);
}

TEST_CASE("tpe config round-trips through the map form") {
  gloam::TpeConfig cfg;
  cfg.lower = -2.0;
  cfg.upper = 4.0;
  cfg.startup_trials = 11;
  cfg.gamma = 0.3;
  cfg.candidates = 16;
  cfg.min_bandwidth = 5e-3;
  cfg.budget = 77;
  cfg.parallelism = 4;
  cfg.include_zero_baseline = false;

  const gloam::ConfigMap map = gloam::tpe_config_to_map(cfg);
  const gloam::TpeConfig back = gloam::tpe_config_from_map(map);
  CHECK(back.lower == cfg.lower);
  CHECK(back.upper == cfg.upper);
  CHECK(back.startup_trials == cfg.startup_trials);
  CHECK(back.gamma == cfg.gamma);
  CHECK(back.candidates == cfg.candidates);
  CHECK(back.min_bandwidth == cfg.min_bandwidth);
  CHECK(back.budget == cfg.budget);
  CHECK(back.parallelism == cfg.parallelism);
  CHECK(back.include_zero_baseline == cfg.include_zero_baseline);

  // The search dimension is fixed by the model shape, not the file.
  CHECK(back.dimension == gloam::TpeConfig{}.dimension);
}

TEST_CASE("rte options round-trip and validate the length list") {
  gloam::RteOptions options;
  options.lengths = {5.0, 10.0, 20.0};
  options.start_stride = 3;

  gloam::ConfigMap map;
  gloam::rte_options_to_map(options, "evaluation", map);
  CHECK(map.at("evaluation.lengths") == "5,10,20");
  const gloam::RteOptions back =
      gloam::rte_options_from_map(map, "evaluation");
  CHECK(back.lengths == options.lengths);
  CHECK(back.start_stride == options.start_stride);

  // Whitespace inside the list is tolerated.
  gloam::ConfigMap spaced;
  spaced["eval.lengths"] = " 100 , 200,300 ";
  const gloam::RteOptions parsed = gloam::rte_options_from_map(spaced, "eval");
  CHECK(parsed.lengths == std::vector<double>{100.0, 200.0, 300.0});

  gloam::ConfigMap empty_list;
  empty_list["eval.lengths"] = " , ";
  CHECK_THROWS_AS((void)gloam::rte_options_from_map(empty_list, "eval"),
                  std::invalid_argument);

  // Missing section keeps the defaults.
  const gloam::RteOptions defaults =
      gloam::rte_options_from_map(gloam::ConfigMap{}, "evaluation");
  CHECK(defaults.lengths == gloam::RteOptions{}.lengths);
  CHECK(defaults.start_stride == gloam::RteOptions{}.start_stride);
}
