// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "gloam/point_cloud.hpp"
#include "gloam/trajectory.hpp"

namespace gloam {

// Finite rectangle: origin is the center, u/v are orthonormal in-plane
// axes, half extents in meters. The normal is u x v.
struct SynthPlane {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d u_axis = Eigen::Vector3d::UnitX();
  Eigen::Vector3d v_axis = Eigen::Vector3d::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;

  Eigen::Vector3d normal() const { return u_axis.cross(v_axis); }
};

// Finite open cylinder from base along a unit axis.
struct SynthCylinder {
  Eigen::Vector3d base = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double radius = 0.15;
  double height = 3.0;
};

struct SynthSphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 0.5;
};

// Ring-style scan pattern: one ray per (elevation, azimuth) cell.
struct ScanPattern {
  int azimuth_count = 360;
  std::vector<double> elevations_deg = {-15.0, -10.0, -6.0, -3.0,
                                        0.0,   3.0,   8.0};
};

struct SynthWorld {
  std::vector<SynthPlane> planes;
  std::vector<SynthCylinder> cylinders;
  std::vector<SynthSphere> spheres;
  ScanPattern pattern;
  double max_range = 80.0;
  double min_range = 0.05;
  // Gaussian noise on the measured range, meters.
  double noise_sigma = 0.0;
  // Ground-truth sensor poses, one scan per pose.
  std::vector<PoseSE3> path;
};

struct SynthResult {
  std::vector<PointCloud> scans;  // sensor frame
  Trajectory ground_truth;
};

// Ray-casts every pattern direction from every path pose and keeps the
// nearest surface hit within range. Deterministic given the seed; scan k
// draws from an independent stream so results do not depend on evaluation
// order.
SynthResult synth_world(const SynthWorld& spec, std::uint64_t seed);

// First hit distance along a single world-frame ray, or a negative value
// when nothing is hit within max_range.
double synth_raycast(const SynthWorld& spec, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& direction);

// A corridor with sparse poles: ground plane, two long walls, a row of
// cylinders, and a few foliage blobs. The path runs down the corridor
// centerline with a gentle lateral sway.
SynthWorld corridor_world(int frame_count, double step, double noise_sigma);

}  // namespace gloam
