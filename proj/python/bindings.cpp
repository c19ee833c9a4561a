// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "gloam/config.hpp"
#include "gloam/evaluation.hpp"
#include "gloam/features.hpp"
#include "gloam/mlp.hpp"
#include "gloam/odometry.hpp"
#include "gloam/parallel.hpp"
#include "gloam/point_cloud.hpp"
#include "gloam/registration.hpp"
#include "gloam/synthetic.hpp"
#include "gloam/training.hpp"

namespace py = pybind11;

namespace {

using Matrix4 = Eigen::Matrix4d;
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

gloam::PointCloud cloud_from_array(const PointMatrix& points) {
  if (points.cols() != 3 && points.cols() != 4) {
    throw std::invalid_argument("points must be Nx3 or Nx4");
  }
  gloam::PointCloud cloud;
  cloud.positions.reserve(points.rows());
  cloud.intensity.reserve(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    cloud.positions.emplace_back(points(i, 0), points(i, 1), points(i, 2));
    cloud.intensity.push_back(points.cols() == 4 ? points(i, 3) : 0.0);
  }
  return cloud;
}

PointMatrix array_from_cloud(const gloam::PointCloud& cloud) {
  const bool with_intensity = cloud.has_intensity();
  PointMatrix out(cloud.size(), 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    out(row, 0) = cloud.positions[i].x();
    out(row, 1) = cloud.positions[i].y();
    out(row, 2) = cloud.positions[i].z();
    out(row, 3) = with_intensity ? cloud.intensity[i] : 0.0;
  }
  return out;
}

gloam::ConfigMap config_from_dict(const py::dict& config) {
  gloam::ConfigMap map;
  for (const auto& item : config) {
    map[py::str(item.first).cast<std::string>()] =
        py::str(item.second).cast<std::string>();
  }
  return map;
}

gloam::Trajectory trajectory_from_list(const std::vector<Matrix4>& poses) {
  gloam::Trajectory traj;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    traj.push_back(static_cast<int>(i), gloam::PoseSE3::from_matrix(poses[i]));
  }
  return traj;
}

std::vector<Matrix4> list_from_trajectory(const gloam::Trajectory& traj) {
  std::vector<Matrix4> out;
  out.reserve(traj.size());
  for (const gloam::PoseSE3& pose : traj.poses) out.push_back(pose.matrix());
  return out;
}

gloam::MlpWeights weights_from_vector(const Eigen::VectorXd& params) {
  if (params.size() != gloam::MlpWeights::kParamCount) {
    throw std::invalid_argument(
        "weights vector must have " +
        std::to_string(gloam::MlpWeights::kParamCount) + " entries");
  }
  gloam::MlpWeights w;
  w.params = params;
  return w;
}

gloam::OdometryConfig odometry_config(const py::dict& config,
                                      const py::object& conversion,
                                      const py::object& eigenvalue) {
  gloam::OdometryConfig cfg =
      gloam::odometry_config_from_map(config_from_dict(config));
  if (!conversion.is_none()) {
    cfg.mlp.conversion = weights_from_vector(conversion.cast<Eigen::VectorXd>());
  }
  if (!eigenvalue.is_none()) {
    cfg.mlp.eigenvalue = weights_from_vector(eigenvalue.cast<Eigen::VectorXd>());
  }
  return cfg;
}

py::dict report_to_dict(const gloam::RteReport& report) {
  py::dict out;
  out["t_rte_percent"] = report.t_rte;
  out["r_rte_deg_per_m"] = report.r_rte;
  out["total_windows"] = report.total_windows;
  out["valid"] = report.valid;
  out["lengths"] = report.lengths;
  out["t_err_percent"] = report.t_err_percent;
  out["r_err_deg_per_m"] = report.r_err_deg_per_m;
  out["window_counts"] = report.window_counts;
  return out;
}

py::dict diagnostics_to_dict(const gloam::FrameDiagnostics& d) {
  py::dict out;
  out["frame"] = d.frame;
  out["iterations"] = d.iterations;
  out["cost"] = d.cost;
  out["correspondences"] = d.correspondences;
  out["converged"] = d.converged;
  out["fallback"] = d.fallback;
  out["seconds"] = d.seconds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GICP LiDAR odometry with learned covariance regularization";
  m.attr("__version__") = "0.1.0";
  m.attr("MLP_PARAM_COUNT") = gloam::MlpWeights::kParamCount;

  m.def("set_thread_count", &gloam::set_thread_count, py::arg("count"),
        "Cap the worker pool used by parallel loops.");

  m.def(
      "synth_corridor",
      [](int frames, double step, double noise_sigma, std::uint64_t seed) {
        const gloam::SynthWorld world =
            gloam::corridor_world(frames, step, noise_sigma);
        const gloam::SynthResult result = gloam::synth_world(world, seed);
        std::vector<PointMatrix> scans;
        scans.reserve(result.scans.size());
        for (const gloam::PointCloud& scan : result.scans) {
          scans.push_back(array_from_cloud(scan));
        }
        // Ground truth is expressed in the frame of the first scan so it is
        // directly comparable with identity-anchored odometry output.
        std::vector<Matrix4> poses;
        const gloam::PoseSE3 origin = gloam::inverse(result.ground_truth.poses[0]);
        for (const gloam::PoseSE3& pose : result.ground_truth.poses) {
          poses.push_back(gloam::compose(origin, pose).matrix());
        }
        return py::make_tuple(scans, poses);
      },
      py::arg("frames"), py::arg("step") = 0.5, py::arg("noise_sigma") = 0.0,
      py::arg("seed") = 0,
      "Ray-cast a synthetic corridor; returns (scans, ground_truth_poses).");

  m.def(
      "voxel_downsample",
      [](const PointMatrix& points, double leaf) {
        return array_from_cloud(gloam::voxel_downsample(cloud_from_array(points), leaf));
      },
      py::arg("points"), py::arg("leaf"),
      "One centroid per occupied voxel; returns Nx4 (xyz + intensity).");

  m.def(
      "classical_descriptors",
      [](const PointMatrix& points, int k) {
        return gloam::classical_descriptors(cloud_from_array(points), k).values;
      },
      py::arg("points"), py::arg("neighbors") = 20,
      "Eigenvalue-shape descriptors, one 8-D row per point.");

  m.def(
      "register_pair",
      [](const PointMatrix& source, const PointMatrix& target,
         const py::dict& config, const py::object& initial,
         const py::object& conversion, const py::object& eigenvalue) {
        const gloam::OdometryConfig cfg =
            odometry_config(config, conversion, eigenvalue);
        gloam::PoseSE3 guess;
        if (!initial.is_none()) {
          guess = gloam::PoseSE3::from_matrix(initial.cast<Matrix4>());
        }
        gloam::PcaModel pca;
        const gloam::PcaModel* pca_ptr = nullptr;
        if (gloam::needs_features(cfg)) {
          std::vector<gloam::PointCloud> both = {cloud_from_array(source),
                                                 cloud_from_array(target)};
          pca = gloam::fit_sequence_pca(gloam::memory_scan_source(both), cfg);
          pca_ptr = &pca;
        }
        const gloam::PreparedFrame source_frame =
            gloam::prepare_frame(cloud_from_array(source), 0, cfg, pca_ptr);
        const gloam::PreparedFrame target_frame =
            gloam::prepare_frame(cloud_from_array(target), 1, cfg, pca_ptr);
        const gloam::GaussianCloud source_gauss =
            gloam::make_gaussian_cloud(source_frame, cfg);
        const gloam::GaussianCloud target_gauss =
            gloam::make_gaussian_cloud(target_frame, cfg);
        const gloam::RegistrationResult result = gloam::register_clouds(
            source_gauss, target_gauss, guess, cfg.registration);
        py::dict out;
        out["pose"] = result.pose.matrix();
        out["converged"] = result.converged;
        out["iterations"] = result.iterations;
        out["cost"] = result.final_cost;
        out["correspondences"] = result.inlier_count;
        out["message"] = result.message;
        return out;
      },
      py::arg("source"), py::arg("target"), py::arg("config") = py::dict(),
      py::arg("initial") = py::none(), py::arg("conversion") = py::none(),
      py::arg("eigenvalue") = py::none(),
      "GICP alignment; returns the target-from-source pose and diagnostics.");

  m.def(
      "run_odometry",
      [](const std::vector<PointMatrix>& scans, const py::dict& config,
         const py::object& conversion, const py::object& eigenvalue) {
        const gloam::OdometryConfig cfg =
            odometry_config(config, conversion, eigenvalue);
        std::vector<gloam::PointCloud> clouds;
        clouds.reserve(scans.size());
        for (const PointMatrix& scan : scans) {
          clouds.push_back(cloud_from_array(scan));
        }
        const gloam::OdometryResult result =
            gloam::run_sequence(gloam::memory_scan_source(std::move(clouds)), cfg);
        py::list diagnostics;
        for (const gloam::FrameDiagnostics& d : result.diagnostics) {
          diagnostics.append(diagnostics_to_dict(d));
        }
        return py::make_tuple(list_from_trajectory(result.trajectory), diagnostics);
      },
      py::arg("scans"), py::arg("config") = py::dict(),
      py::arg("conversion") = py::none(), py::arg("eigenvalue") = py::none(),
      "Sequential odometry; returns (poses, per-frame diagnostics).");

  m.def(
      "rte",
      [](const std::vector<Matrix4>& gt, const std::vector<Matrix4>& est,
         const std::vector<double>& lengths, int start_stride) {
        gloam::RteOptions options;
        if (!lengths.empty()) options.lengths = lengths;
        options.start_stride = start_stride;
        return report_to_dict(
            gloam::rte(trajectory_from_list(gt), trajectory_from_list(est), options));
      },
      py::arg("ground_truth"), py::arg("estimate"),
      py::arg("lengths") = std::vector<double>{}, py::arg("start_stride") = 1,
      "KITTI-style relative trajectory error over distance windows.");

  m.def(
      "train",
      [](const std::vector<std::pair<std::vector<PointMatrix>, std::vector<Matrix4>>>&
             sequences,
         const py::dict& config, const std::string& journal) {
        const gloam::ConfigMap map = config_from_dict(config);
        const gloam::OdometryConfig odo_cfg = gloam::odometry_config_from_map(map);
        const gloam::TpeConfig tpe_cfg = gloam::tpe_config_from_map(map);
        const gloam::RteOptions loss = gloam::rte_options_from_map(map, "loss");
        std::vector<gloam::TrainingSequence> dataset;
        for (const auto& [scans, poses] : sequences) {
          std::vector<gloam::PointCloud> clouds;
          clouds.reserve(scans.size());
          for (const PointMatrix& scan : scans) {
            clouds.push_back(cloud_from_array(scan));
          }
          gloam::TrainingSequence sequence;
          sequence.scans = gloam::memory_scan_source(std::move(clouds));
          sequence.ground_truth = trajectory_from_list(poses);
          dataset.push_back(std::move(sequence));
        }
        const gloam::TrainResult result =
            gloam::train(dataset, odo_cfg, tpe_cfg, loss, journal);
        py::dict out;
        out["conversion"] = result.best.conversion.params;
        out["eigenvalue"] = result.best.eigenvalue.params;
        out["best_index"] = result.study.best_index();
        py::list trials;
        for (const gloam::Trial& trial : result.study.trials) {
          py::dict t;
          t["index"] = trial.index;
          t["loss"] = trial.loss;
          t["failed"] = trial.failed;
          trials.append(t);
        }
        out["trials"] = trials;
        return out;
      },
      py::arg("sequences"), py::arg("config") = py::dict(),
      py::arg("journal") = std::string(),
      "Closed-loop TPE search over both MLPs; resumes from the journal.");

  m.def(
      "read_kitti_bin",
      [](const std::string& path, double min_range, double max_range) {
        gloam::RangeGate gate;
        gate.min_range = min_range;
        gate.max_range = max_range;
        return array_from_cloud(gloam::read_kitti_bin(path, gate));
      },
      py::arg("path"), py::arg("min_range") = 1.0, py::arg("max_range") = 100.0,
      "Load a KITTI .bin scan as Nx4 (xyz + intensity).");

  m.def(
      "write_kitti_bin",
      [](const PointMatrix& points, const std::string& path) {
        gloam::write_kitti_bin(cloud_from_array(points), path);
      },
      py::arg("points"), py::arg("path"));

  m.def(
      "read_kitti_poses",
      [](const std::string& path) {
        return list_from_trajectory(gloam::read_kitti_poses(path));
      },
      py::arg("path"), "Load KITTI 3x4 pose rows as a list of 4x4 matrices.");

  m.def(
      "write_kitti_poses",
      [](const std::vector<Matrix4>& poses, const std::string& path) {
        gloam::write_kitti_poses(trajectory_from_list(poses), path);
      },
      py::arg("poses"), py::arg("path"));

  m.def(
      "weights_random",
      [](std::uint64_t seed) { return gloam::weights_random(seed).params; },
      py::arg("seed"), "Uniform [-1, 1] MLP parameter vector.");

  m.def(
      "load_weights",
      [](const std::string& path) {
        const gloam::LoadedWeights loaded = gloam::weights_deserialize(path);
        return py::make_tuple(gloam::to_string(loaded.role), loaded.weights.params);
      },
      py::arg("path"), "Returns (role, parameter vector).");

  m.def(
      "save_weights",
      [](const Eigen::VectorXd& params, const std::string& role,
         const std::string& path) {
        const gloam::MlpRole parsed = role == "conversion"
                                          ? gloam::MlpRole::kConversion
                                          : gloam::MlpRole::kEigenvalue;
        if (role != "conversion" && role != "eigenvalue") {
          throw std::invalid_argument("role must be conversion or eigenvalue");
        }
        gloam::weights_serialize(weights_from_vector(params), parsed, path);
      },
      py::arg("params"), py::arg("role"), py::arg("path"));

  m.def(
      "export_ply",
      [](const PointMatrix& points, const std::string& path) {
        gloam::export_ply(cloud_from_array(points), nullptr, path);
      },
      py::arg("points"), py::arg("path"), "Write an ASCII PLY point cloud.");
}
