// SPDX-License-Identifier: Apache-2.0
#include "gloam/odometry.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gloam {

namespace {

std::string frame_feature_path(const std::string& dir, int frame_index) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06d.glf", frame_index);
  return dir + "/" + name;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

std::string to_string(MotionPrior prior) {
  return prior == MotionPrior::kIdentity ? "identity" : "constant_velocity";
}

std::string to_string(FeatureBackbone backbone) {
  return backbone == FeatureBackbone::kClassical ? "classical" : "external";
}

MotionPrior motion_prior_from_string(const std::string& s) {
  if (s == "identity") return MotionPrior::kIdentity;
  if (s == "constant_velocity") return MotionPrior::kConstantVelocity;
  throw std::invalid_argument("unknown motion prior: " + s);
}

FeatureBackbone feature_backbone_from_string(const std::string& s) {
  if (s == "classical") return FeatureBackbone::kClassical;
  if (s == "external") return FeatureBackbone::kExternal;
  throw std::invalid_argument("unknown feature backbone: " + s);
}

ScanSource memory_scan_source(std::vector<PointCloud> scans) {
  auto shared = std::make_shared<std::vector<PointCloud>>(std::move(scans));
  ScanSource source;
  source.count = shared->size();
  source.load = [shared](std::size_t i) { return (*shared)[i]; };
  return source;
}

PoseSE3 constant_velocity_prior(const Trajectory& trajectory) {
  const std::size_t n = trajectory.size();
  if (n < 2) return PoseSE3::identity();
  const PoseSE3& last = trajectory.poses[n - 1];
  const PoseSE3& prev = trajectory.poses[n - 2];
  return compose(last, compose(inverse(prev), last));
}

bool needs_features(const OdometryConfig& cfg) {
  return cfg.registration.association == AssociationMode::kFeatureExtended ||
         cfg.registration.covariance == CovarianceMode::kLearned;
}

PreparedFrame prepare_frame(const PointCloud& raw, int frame_index,
                            const OdometryConfig& cfg, const PcaModel* pca) {
  PreparedFrame frame;
  frame.cloud = voxel_downsample(raw, cfg.voxel_leaf);
  frame.cloud.frame_id = frame_index;
  const int min_points = std::max(cfg.registration.covariance_neighbors,
                                  cfg.descriptor_neighbors);
  if (frame.cloud.size() < static_cast<std::size_t>(min_points)) {
    throw std::runtime_error("frame " + std::to_string(frame_index) +
                             ": too few points after downsampling (" +
                             std::to_string(frame.cloud.size()) + ")");
  }
  frame.tree = std::make_shared<KdTree<3>>(frame.cloud.positions);
  frame.basis = covariance_basis(frame.cloud, *frame.tree,
                                 cfg.registration.covariance_neighbors);

  if (needs_features(cfg)) {
    if (!pca) throw std::invalid_argument("prepare_frame: missing pca model");
    RawFeatures raw_features;
    if (cfg.backbone == FeatureBackbone::kClassical) {
      raw_features = classical_descriptors(frame.cloud, *frame.tree,
                                           cfg.descriptor_neighbors);
    } else {
      raw_features = load_external_features(
          frame_feature_path(cfg.external_feature_dir, frame_index),
          frame.cloud.size());
    }
    frame.features = pca_transform(*pca, raw_features);
  }
  return frame;
}

PcaModel fit_sequence_pca(const ScanSource& scans, const OdometryConfig& cfg) {
  if (scans.count == 0) throw std::invalid_argument("fit_sequence_pca: no scans");
  const std::size_t per_frame_quota = std::max<std::size_t>(
      1, static_cast<std::size_t>(cfg.pca_max_samples) / scans.count);

  std::vector<Eigen::VectorXd> rows;
  Eigen::Index dim = 0;
  for (std::size_t k = 0; k < scans.count; ++k) {
    PointCloud cloud = voxel_downsample(scans.load(k), cfg.voxel_leaf);
    if (cloud.size() < static_cast<std::size_t>(cfg.descriptor_neighbors)) {
      continue;
    }
    RawFeatures raw;
    if (cfg.backbone == FeatureBackbone::kClassical) {
      raw = classical_descriptors(cloud, cfg.descriptor_neighbors);
    } else {
      raw = load_external_features(
          frame_feature_path(cfg.external_feature_dir, static_cast<int>(k)),
          cloud.size());
    }
    dim = raw.cols();
    const std::size_t n = static_cast<std::size_t>(raw.rows());
    const std::size_t stride = std::max<std::size_t>(1, n / per_frame_quota);
    for (std::size_t i = 0; i < n; i += stride) {
      rows.push_back(raw.values.row(static_cast<Eigen::Index>(i)).transpose());
    }
  }
  if (rows.size() < 7) {
    throw std::runtime_error("fit_sequence_pca: not enough descriptor rows");
  }

  RawFeatures samples;
  samples.values.resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    samples.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return pca_fit(samples);
}

GaussianCloud make_gaussian_cloud(const PreparedFrame& frame,
                                  const OdometryConfig& cfg) {
  GaussianCloud gc;
  gc.cloud = frame.cloud;
  if (cfg.registration.covariance == CovarianceMode::kPlane) {
    gc.covariances =
        plane_covariances(frame.basis, cfg.registration.eigenvalue_floor);
  } else {
    gc.covariances =
        learned_covariances(frame.basis, frame.features, cfg.mlp.eigenvalue,
                            cfg.registration.eigenvalue_floor);
  }
  gc.degenerate_count = frame.basis.degenerate_count;
  set_association_vectors(gc, cfg.registration.association, &frame.features,
                          &cfg.mlp.conversion);
  return gc;
}

namespace {

using FrameProvider =
    std::function<std::shared_ptr<const PreparedFrame>(std::size_t)>;

OdometryResult run_frames(std::size_t count, const FrameProvider& frame_at,
                          const OdometryConfig& cfg) {
  if (count < 2) {
    throw std::invalid_argument("run_sequence: needs at least 2 scans");
  }

  OdometryResult result;
  result.trajectory.push_back(0, PoseSE3::identity());

  std::shared_ptr<const PreparedFrame> prev = frame_at(0);
  GaussianCloud target = make_gaussian_cloud(*prev, cfg);
  int consecutive_failures = 0;

  for (std::size_t k = 1; k < count; ++k) {
    const auto t0 = std::chrono::steady_clock::now();

    const PoseSE3& last_world = result.trajectory.poses.back();
    PoseSE3 prior_rel = PoseSE3::identity();
    if (cfg.prior == MotionPrior::kConstantVelocity) {
      prior_rel =
          compose(inverse(last_world), constant_velocity_prior(result.trajectory));
    }

    FrameDiagnostics diag;
    diag.frame = static_cast<int>(k);
    PoseSE3 rel = prior_rel;
    bool failed = false;
    std::shared_ptr<const PreparedFrame> cur;
    GaussianCloud source;
    try {
      cur = frame_at(k);
      source = make_gaussian_cloud(*cur, cfg);
      const RegistrationResult reg =
          register_clouds(source, target, prior_rel, cfg.registration);
      diag.iterations = reg.iterations;
      diag.cost = reg.final_cost;
      diag.correspondences = reg.inlier_count;
      diag.converged = reg.converged;
      const bool pose_ok = reg.pose.rotation.allFinite() &&
                           reg.pose.translation.allFinite();
      if (reg.inlier_count < 10 || !pose_ok) {
        failed = true;
      } else {
        rel = reg.pose;
      }
    } catch (const std::exception&) {
      failed = true;
    }

    diag.fallback = failed;
    if (failed) {
      ++consecutive_failures;
      if (consecutive_failures >= cfg.max_consecutive_failures) {
        throw std::runtime_error(
            "odometry aborted: " + std::to_string(consecutive_failures) +
            " consecutive registration failures at frame " + std::to_string(k));
      }
    } else {
      consecutive_failures = 0;
    }

    result.trajectory.push_back(static_cast<int>(k), compose(last_world, rel));
    diag.seconds = seconds_since(t0);
    result.diagnostics.push_back(diag);

    if (cur) {
      prev = cur;
      target = std::move(source);
    }
  }
  return result;
}

}  // namespace

PreparedSequence prepare_sequence(const ScanSource& scans,
                                  const OdometryConfig& cfg) {
  PreparedSequence seq;
  if (needs_features(cfg)) {
    seq.pca = fit_sequence_pca(scans, cfg);
    seq.has_pca = true;
  }
  seq.frames.reserve(scans.count);
  for (std::size_t k = 0; k < scans.count; ++k) {
    seq.frames.push_back(std::make_shared<const PreparedFrame>(
        prepare_frame(scans.load(k), static_cast<int>(k), cfg,
                      seq.has_pca ? &seq.pca : nullptr)));
  }
  return seq;
}

OdometryResult run_prepared(const PreparedSequence& seq,
                            const OdometryConfig& cfg) {
  return run_frames(
      seq.frames.size(), [&](std::size_t k) { return seq.frames[k]; }, cfg);
}

OdometryResult run_sequence(const ScanSource& scans, const OdometryConfig& cfg) {
  PcaModel pca;
  bool has_pca = false;
  if (needs_features(cfg)) {
    pca = fit_sequence_pca(scans, cfg);
    has_pca = true;
  }
  return run_frames(
      scans.count,
      [&](std::size_t k) {
        return std::make_shared<const PreparedFrame>(prepare_frame(
            scans.load(k), static_cast<int>(k), cfg, has_pca ? &pca : nullptr));
      },
      cfg);
}

}  // namespace gloam
