// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gloam/features.hpp"
#include "gloam/point_cloud.hpp"
#include "gloam/registration.hpp"
#include "gloam/trajectory.hpp"

namespace gloam {

enum class MotionPrior { kIdentity, kConstantVelocity };
enum class FeatureBackbone { kClassical, kExternal };

std::string to_string(MotionPrior prior);
std::string to_string(FeatureBackbone backbone);
MotionPrior motion_prior_from_string(const std::string& s);
FeatureBackbone feature_backbone_from_string(const std::string& s);

struct OdometryConfig {
  RegistrationConfig registration;
  double voxel_leaf = 0.25;
  RangeGate range_gate;
  FeatureBackbone backbone = FeatureBackbone::kClassical;
  // Directory of GLF1 files named <frame:06>.glf, row-aligned with the
  // voxel-downsampled cloud of each frame.
  std::string external_feature_dir;
  int descriptor_neighbors = 20;
  int pca_max_samples = 100000;
  MotionPrior prior = MotionPrior::kConstantVelocity;
  int max_consecutive_failures = 3;
  MlpPair mlp;
};

struct FrameDiagnostics {
  int frame = 0;
  int iterations = 0;
  double cost = 0.0;
  int correspondences = 0;
  bool converged = false;
  // Registration rejected; the motion-prior relative pose was used.
  bool fallback = false;
  double seconds = 0.0;
};

struct OdometryResult {
  Trajectory trajectory;
  std::vector<FrameDiagnostics> diagnostics;
};

// Lazy scan access so sequences never need to be resident all at once.
struct ScanSource {
  std::size_t count = 0;
  std::function<PointCloud(std::size_t)> load;
};

ScanSource memory_scan_source(std::vector<PointCloud> scans);

// Predicted next world pose: replay of the last relative pose; identity
// when fewer than two poses exist.
PoseSE3 constant_velocity_prior(const Trajectory& trajectory);

// Weight-independent per-frame data, reusable across MLP weight settings
// (covariance eigenstructure and PCA features do not depend on them).
struct PreparedFrame {
  PointCloud cloud;  // voxel-downsampled
  std::shared_ptr<const KdTree<3>> tree;
  CovarianceBasis basis;
  FeatureSet features;  // zero rows when the config needs no features
};

struct PreparedSequence {
  std::vector<std::shared_ptr<const PreparedFrame>> frames;
  PcaModel pca;
  bool has_pca = false;
};

bool needs_features(const OdometryConfig& cfg);

PreparedFrame prepare_frame(const PointCloud& raw, int frame_index,
                            const OdometryConfig& cfg, const PcaModel* pca);

// Fits the per-sequence PCA model on a uniform row subsample of the raw
// descriptors (at most cfg.pca_max_samples rows across all frames).
PcaModel fit_sequence_pca(const ScanSource& scans, const OdometryConfig& cfg);

PreparedSequence prepare_sequence(const ScanSource& scans,
                                  const OdometryConfig& cfg);

// Builds the Gaussian model + association data of one prepared frame under
// the given config and MLP weights.
GaussianCloud make_gaussian_cloud(const PreparedFrame& frame,
                                  const OdometryConfig& cfg);

// Scan-to-scan odometry over prepared frames.
OdometryResult run_prepared(const PreparedSequence& seq,
                            const OdometryConfig& cfg);

// Streaming pipeline: prepares each frame on demand, keeping only the
// previous frame cached. Throws std::runtime_error after
// max_consecutive_failures registration fallbacks in a row.
OdometryResult run_sequence(const ScanSource& scans, const OdometryConfig& cfg);

}  // namespace gloam
