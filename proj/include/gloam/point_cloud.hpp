// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "gloam/geometry.hpp"

namespace gloam {

struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  // Empty, or one value per point.
  std::vector<double> intensity;
  int frame_id = 0;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_intensity() const { return !intensity.empty(); }
};

struct RangeGate {
  double min_range = 1.0;
  double max_range = 100.0;
};

// Reads a KITTI velodyne scan (x, y, z, intensity as float32 LE records).
// Points outside the range gate are dropped; throws std::runtime_error
// with the byte offset on truncated records or non-finite values.
PointCloud read_kitti_bin(const std::string& path, const RangeGate& gate = {});

void write_kitti_bin(const PointCloud& cloud, const std::string& path);

// Centroid voxel filter. Voxel index = floor(coord / leaf) per axis,
// packed 21 bits per axis; output is ordered by packed key. Points whose
// voxel index falls outside the packable range are dropped and counted.
PointCloud voxel_downsample(const PointCloud& cloud, double leaf,
                            std::size_t* dropped = nullptr);

// ASCII PLY export; covariances, when given, add six per-vertex
// properties c_xx c_xy c_xz c_yy c_yz c_zz.
void export_ply(const PointCloud& cloud, const std::vector<SymMat3>* covariances,
                const std::string& path);

// CSV export with header x,y,z[,intensity].
void export_csv(const PointCloud& cloud, const std::string& path);

}  // namespace gloam
