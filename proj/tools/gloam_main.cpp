// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <string>
#include <vector>

#include "gloam/config.hpp"
#include "gloam/evaluation.hpp"
#include "gloam/features.hpp"
#include "gloam/mlp.hpp"
#include "gloam/odometry.hpp"
#include "gloam/parallel.hpp"
#include "gloam/point_cloud.hpp"
#include "gloam/training.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> list_scan_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw CliError(dir + ": not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".bin") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw CliError(dir + ": no .bin scans found");
  return paths;
}

gloam::ScanSource directory_scan_source(std::vector<std::string> paths,
                                        const gloam::RangeGate& gate) {
  auto shared = std::make_shared<std::vector<std::string>>(std::move(paths));
  gloam::ScanSource source;
  source.count = shared->size();
  source.load = [shared, gate](std::size_t i) {
    return gloam::read_kitti_bin((*shared)[i], gate);
  };
  return source;
}

gloam::ConfigMap resolve_config(const std::string& path) {
  return path.empty() ? gloam::ConfigMap{} : gloam::read_config_file(path);
}

gloam::MlpPair load_weight_pair(const std::vector<std::string>& paths) {
  const gloam::LoadedWeights conversion = gloam::weights_deserialize(paths[0]);
  if (conversion.role != gloam::MlpRole::kConversion) {
    throw CliError(paths[0] + ": expected conversion weights, found " +
                   gloam::to_string(conversion.role));
  }
  const gloam::LoadedWeights eigenvalue = gloam::weights_deserialize(paths[1]);
  if (eigenvalue.role != gloam::MlpRole::kEigenvalue) {
    throw CliError(paths[1] + ": expected eigenvalue weights, found " +
                   gloam::to_string(eigenvalue.role));
  }
  return gloam::MlpPair{conversion.weights, eigenvalue.weights};
}

json config_to_json(const gloam::ConfigMap& map) {
  json out = json::object();
  for (const auto& [key, value] : map) out[key] = value;
  return out;
}

json manifest_base(const std::string& command, std::uint64_t seed, int threads,
                   const std::string& config_path) {
  json manifest;
  manifest["tool"] = "gloam";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["threads"] = threads;
  manifest["config"] = config_path.empty() ? json() : json(config_path);
  return manifest;
}

void write_json_file(const std::string& path, const json& value) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CliError(path + ": cannot open for writing");
  out << value.dump(2) << '\n';
  if (!out) throw CliError(path + ": write failed");
}

void write_diagnostics_jsonl(const std::vector<gloam::FrameDiagnostics>& diags,
                             const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CliError(path + ": cannot open for writing");
  for (const gloam::FrameDiagnostics& d : diags) {
    json line;
    line["frame"] = d.frame;
    line["iterations"] = d.iterations;
    line["cost"] = d.cost;
    line["correspondences"] = d.correspondences;
    line["converged"] = d.converged;
    line["fallback"] = d.fallback;
    line["seconds"] = d.seconds;
    out << line.dump() << '\n';
  }
  if (!out) throw CliError(path + ": write failed");
}

struct OdomArgs {
  std::string scans;
  std::string config;
  std::string out;
  std::string diagnostics;
  std::vector<std::string> weights;
  std::string assoc;
  std::string cov;
  std::uint64_t seed = 0;
  int threads = 0;
};

int cmd_odom(const OdomArgs& args) {
  if (args.threads > 0) gloam::set_thread_count(args.threads);
  const gloam::ConfigMap map = resolve_config(args.config);
  gloam::OdometryConfig cfg = gloam::odometry_config_from_map(map);
  if (!args.assoc.empty()) {
    cfg.registration.association =
        args.assoc == "feature" ? gloam::AssociationMode::kFeatureExtended
                                : gloam::AssociationMode::kEuclidean;
  }
  if (!args.cov.empty()) {
    cfg.registration.covariance = gloam::covariance_mode_from_string(args.cov);
  }
  if (!args.weights.empty()) cfg.mlp = load_weight_pair(args.weights);

  std::vector<std::string> scan_files = list_scan_files(args.scans);
  const std::size_t frame_count = scan_files.size();
  const gloam::ScanSource source =
      directory_scan_source(std::move(scan_files), cfg.range_gate);

  const gloam::OdometryResult result = gloam::run_sequence(source, cfg);
  gloam::write_kitti_poses(result.trajectory, args.out);

  const std::string diagnostics_path =
      args.diagnostics.empty() ? args.out + ".diagnostics.jsonl"
                               : args.diagnostics;
  write_diagnostics_jsonl(result.diagnostics, diagnostics_path);

  json manifest = manifest_base("odom", args.seed, args.threads, args.config);
  manifest["inputs"]["scans"] = args.scans;
  manifest["inputs"]["frames"] = frame_count;
  manifest["inputs"]["weights"] = args.weights;
  manifest["outputs"]["poses"] = args.out;
  manifest["outputs"]["diagnostics"] = diagnostics_path;
  manifest["resolved_config"] = config_to_json(gloam::odometry_config_to_map(cfg));
  write_json_file(args.out + ".manifest.json", manifest);

  std::printf("wrote %zu poses to %s\n", result.trajectory.size(),
              args.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string gt;
  std::string est;
  std::string out;
  std::string config;
  std::string lengths;
  int stride = 0;
};

int cmd_eval(const EvalArgs& args) {
  gloam::ConfigMap map = resolve_config(args.config);
  if (!args.lengths.empty()) map["evaluation.lengths"] = args.lengths;
  if (args.stride > 0) {
    map["evaluation.start_stride"] = std::to_string(args.stride);
  }
  const gloam::RteOptions options =
      gloam::rte_options_from_map(map, "evaluation");

  const gloam::Trajectory gt = gloam::read_kitti_poses(args.gt);
  const gloam::Trajectory est = gloam::read_kitti_poses(args.est);
  const gloam::RteReport report = gloam::rte(gt, est, options);

  gloam::write_rte_csv(report, args.out);
  std::fputs(gloam::format_rte_table(report).c_str(), stdout);

  json manifest = manifest_base("eval", 0, 0, args.config);
  manifest["inputs"]["gt"] = args.gt;
  manifest["inputs"]["est"] = args.est;
  manifest["outputs"]["report"] = args.out;
  manifest["summary"]["valid"] = report.valid;
  manifest["summary"]["t_rte_percent"] = report.t_rte;
  manifest["summary"]["r_rte_deg_per_m"] = report.r_rte;
  manifest["summary"]["windows"] = report.total_windows;
  write_json_file(args.out + ".manifest.json", manifest);
  return 0;
}

struct TrainArgs {
  std::string dataset;
  std::string config;
  std::string study;
  std::string out_weights;
  std::uint64_t seed = 0;
  int budget = 0;
  int threads = 0;
};

int cmd_train(const TrainArgs& args) {
  if (args.threads > 0) gloam::set_thread_count(args.threads);
  const gloam::ConfigMap map = resolve_config(args.config);
  const gloam::OdometryConfig odo_cfg = gloam::odometry_config_from_map(map);
  gloam::TpeConfig tpe_cfg = gloam::tpe_config_from_map(map);
  tpe_cfg.seed = args.seed;
  if (args.budget > 0) tpe_cfg.budget = args.budget;
  if (args.threads > 0) tpe_cfg.parallelism = args.threads;
  const gloam::RteOptions loss_options = gloam::rte_options_from_map(map, "loss");

  std::ifstream dataset_file(args.dataset);
  if (!dataset_file) throw CliError(args.dataset + ": cannot open");
  json dataset_json;
  try {
    dataset_json = json::parse(dataset_file);
  } catch (const json::parse_error& e) {
    throw CliError(args.dataset + ": " + e.what());
  }
  if (!dataset_json.contains("sequences") ||
      !dataset_json["sequences"].is_array() ||
      dataset_json["sequences"].empty()) {
    throw CliError(args.dataset + ": expected a non-empty \"sequences\" array");
  }

  std::vector<gloam::TrainingSequence> dataset;
  json sequence_manifest = json::array();
  for (const json& entry : dataset_json["sequences"]) {
    if (!entry.contains("scans") || !entry.contains("ground_truth")) {
      throw CliError(args.dataset +
                     ": each sequence needs \"scans\" and \"ground_truth\"");
    }
    const std::string scans_dir = entry["scans"].get<std::string>();
    const std::string gt_path = entry["ground_truth"].get<std::string>();
    std::vector<std::string> files = list_scan_files(scans_dir);
    const std::size_t frames = files.size();
    gloam::TrainingSequence sequence;
    sequence.scans = directory_scan_source(std::move(files), odo_cfg.range_gate);
    sequence.ground_truth = gloam::read_kitti_poses(gt_path);
    dataset.push_back(std::move(sequence));
    sequence_manifest.push_back(
        {{"scans", scans_dir}, {"ground_truth", gt_path}, {"frames", frames}});
  }

  fs::create_directories(args.out_weights);
  const std::string journal =
      args.study.empty() ? (fs::path(args.out_weights) / "study.journal").string()
                         : args.study;

  const gloam::TrainResult result =
      gloam::train(dataset, odo_cfg, tpe_cfg, loss_options, journal);

  const std::string conversion_path =
      (fs::path(args.out_weights) / "conversion.mlp").string();
  const std::string eigenvalue_path =
      (fs::path(args.out_weights) / "eigenvalue.mlp").string();
  gloam::weights_serialize(result.best.conversion, gloam::MlpRole::kConversion,
                           conversion_path);
  gloam::weights_serialize(result.best.eigenvalue, gloam::MlpRole::kEigenvalue,
                           eigenvalue_path);

  const int best = result.study.best_index();
  json manifest = manifest_base("train", args.seed, args.threads, args.config);
  manifest["inputs"]["dataset"] = args.dataset;
  manifest["inputs"]["sequences"] = sequence_manifest;
  manifest["study"]["journal"] = journal;
  manifest["study"]["budget"] = tpe_cfg.budget;
  manifest["study"]["trials"] = result.study.trials.size();
  manifest["study"]["best_index"] = best;
  manifest["study"]["best_loss"] =
      result.study.trials[static_cast<std::size_t>(best)].loss;
  manifest["outputs"]["conversion"] = conversion_path;
  manifest["outputs"]["eigenvalue"] = eigenvalue_path;
  manifest["resolved_config"] =
      config_to_json(gloam::odometry_config_to_map(odo_cfg));
  write_json_file((fs::path(args.out_weights) / "manifest.json").string(),
                  manifest);

  std::printf("best trial %d loss %.6g (%zu trials) weights in %s\n", best,
              result.study.trials[static_cast<std::size_t>(best)].loss,
              result.study.trials.size(), args.out_weights.c_str());
  return 0;
}

struct FeaturesArgs {
  std::string scans;
  std::string out;
  std::string config;
  int threads = 0;
};

int cmd_features(const FeaturesArgs& args) {
  if (args.threads > 0) gloam::set_thread_count(args.threads);
  const gloam::ConfigMap map = resolve_config(args.config);
  gloam::OdometryConfig cfg = gloam::odometry_config_from_map(map);
  cfg.backbone = gloam::FeatureBackbone::kClassical;

  std::vector<std::string> files = list_scan_files(args.scans);
  fs::create_directories(args.out);

  const gloam::ScanSource source =
      directory_scan_source(files, cfg.range_gate);
  const gloam::PcaModel pca = gloam::fit_sequence_pca(source, cfg);
  const std::string pca_path = (fs::path(args.out) / "pca.model").string();
  gloam::save_pca_model(pca, pca_path);

  json files_manifest = json::array();
  for (std::size_t k = 0; k < source.count; ++k) {
    const gloam::PointCloud cloud =
        gloam::voxel_downsample(source.load(k), cfg.voxel_leaf);
    const gloam::RawFeatures features =
        gloam::classical_descriptors(cloud, cfg.descriptor_neighbors);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.glf", k);
    const std::string path = (fs::path(args.out) / name).string();
    gloam::save_external_features(features, path);
    files_manifest.push_back({{"scan", files[k]},
                              {"features", path},
                              {"points", cloud.size()},
                              {"dims", features.cols()}});
  }

  json manifest = manifest_base("features", 0, args.threads, args.config);
  manifest["inputs"]["scans"] = args.scans;
  manifest["outputs"]["pca"] = pca_path;
  manifest["outputs"]["frames"] = files_manifest;
  write_json_file((fs::path(args.out) / "manifest.json").string(), manifest);

  std::printf("wrote %zu feature files to %s\n", source.count,
              args.out.c_str());
  return 0;
}

struct ExportArgs {
  std::string scan;
  std::string out;
  std::string config;
  std::string cov;
  std::vector<std::string> weights;
};

int cmd_export(const ExportArgs& args) {
  const gloam::ConfigMap map = resolve_config(args.config);
  gloam::OdometryConfig cfg = gloam::odometry_config_from_map(map);
  if (!args.cov.empty()) {
    cfg.registration.covariance = gloam::covariance_mode_from_string(args.cov);
  }
  if (!args.weights.empty()) cfg.mlp = load_weight_pair(args.weights);
  cfg.backbone = gloam::FeatureBackbone::kClassical;

  const gloam::PointCloud raw = gloam::read_kitti_bin(args.scan, cfg.range_gate);

  gloam::PcaModel pca;
  const bool learned = gloam::needs_features(cfg);
  if (learned) {
    std::vector<gloam::PointCloud> clouds{raw};
    pca = gloam::fit_sequence_pca(gloam::memory_scan_source(clouds), cfg);
  }
  const gloam::PreparedFrame frame =
      gloam::prepare_frame(raw, 0, cfg, learned ? &pca : nullptr);
  const gloam::GaussianCloud gaussian = gloam::make_gaussian_cloud(frame, cfg);

  gloam::export_ply(gaussian.cloud, &gaussian.covariances, args.out);

  json manifest = manifest_base("export", 0, 0, args.config);
  manifest["inputs"]["scan"] = args.scan;
  manifest["inputs"]["weights"] = args.weights;
  manifest["covariance"] = gloam::to_string(cfg.registration.covariance);
  manifest["outputs"]["ply"] = args.out;
  manifest["outputs"]["vertices"] = gaussian.size();
  manifest["outputs"]["degenerate"] = gaussian.degenerate_count;
  write_json_file(args.out + ".manifest.json", manifest);

  std::printf("wrote %zu vertices to %s\n", gaussian.size(), args.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gloam: GICP LiDAR odometry with learned covariance regularization"};
  app.set_version_flag("--version", std::string("gloam ") + kVersion);
  app.require_subcommand(1);

  OdomArgs odom;
  CLI::App* odom_cmd = app.add_subcommand("odom", "Run odometry over a scan directory");
  odom_cmd->add_option("--scans", odom.scans, "Directory of KITTI .bin scans")
      ->required();
  odom_cmd->add_option("--config", odom.config, "Configuration file")
      ->envname("GLOAM_CONFIG");
  odom_cmd->add_option("--out", odom.out, "Output pose file")->required();
  odom_cmd->add_option("--diagnostics", odom.diagnostics,
                       "Per-frame JSONL diagnostics path");
  odom_cmd->add_option("--weights", odom.weights,
                       "Conversion and eigenvalue weight files")
      ->expected(2);
  odom_cmd->add_option("--assoc", odom.assoc, "Association mode")
      ->check(CLI::IsMember({"euclidean", "feature"}));
  odom_cmd->add_option("--cov", odom.cov, "Covariance mode")
      ->check(CLI::IsMember({"plane", "learned"}));
  odom_cmd->add_option("--seed", odom.seed, "Root seed recorded in the manifest");
  odom_cmd->add_option("--threads", odom.threads, "Worker thread cap");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a trajectory against ground truth");
  eval_cmd->add_option("--gt", eval.gt, "Ground-truth pose file")->required();
  eval_cmd->add_option("--est", eval.est, "Estimated pose file")->required();
  eval_cmd->add_option("--out", eval.out, "Output CSV report")->required();
  eval_cmd->add_option("--config", eval.config, "Configuration file")
      ->envname("GLOAM_CONFIG");
  eval_cmd->add_option("--lengths", eval.lengths,
                       "Comma-separated window lengths in meters");
  eval_cmd->add_option("--stride", eval.stride, "Start-frame stride");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Optimize MLP weights closed-loop");
  train_cmd->add_option("--dataset", train.dataset, "Dataset manifest (JSON)")
      ->required();
  train_cmd->add_option("--config", train.config, "Configuration file")
      ->envname("GLOAM_CONFIG");
  train_cmd->add_option("--budget", train.budget, "Trial budget");
  train_cmd->add_option("--seed", train.seed, "Root study seed");
  train_cmd->add_option("--study", train.study, "Study journal path");
  train_cmd->add_option("--out-weights", train.out_weights,
                        "Directory for the trained weights")
      ->required();
  train_cmd->add_option("--threads", train.threads, "Worker thread cap");

  FeaturesArgs features;
  CLI::App* features_cmd =
      app.add_subcommand("features", "Dump per-scan descriptors and a PCA model");
  features_cmd->add_option("--scans", features.scans, "Directory of KITTI .bin scans")
      ->required();
  features_cmd->add_option("--out", features.out, "Output directory")->required();
  features_cmd->add_option("--config", features.config, "Configuration file")
      ->envname("GLOAM_CONFIG");
  features_cmd->add_option("--threads", features.threads, "Worker thread cap");

  ExportArgs export_args;
  CLI::App* export_cmd =
      app.add_subcommand("export", "Export a scan with covariances as PLY");
  export_cmd->add_option("--scan", export_args.scan, "KITTI .bin scan")->required();
  export_cmd->add_option("--out", export_args.out, "Output PLY path")->required();
  export_cmd->add_option("--config", export_args.config, "Configuration file")
      ->envname("GLOAM_CONFIG");
  export_cmd->add_option("--cov", export_args.cov, "Covariance mode")
      ->check(CLI::IsMember({"plane", "learned"}));
  export_cmd->add_option("--weights", export_args.weights,
                         "Conversion and eigenvalue weight files")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*odom_cmd) return cmd_odom(odom);
    if (*eval_cmd) return cmd_eval(eval);
    if (*train_cmd) return cmd_train(train);
    if (*features_cmd) return cmd_features(features);
    if (*export_cmd) return cmd_export(export_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gloam: %s\n", e.what());
    return 2;
  }
  return 0;
}
