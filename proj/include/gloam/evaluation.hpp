// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "gloam/trajectory.hpp"

namespace gloam {

struct RteOptions {
  std::vector<double> lengths = {100.0, 200.0, 300.0, 400.0,
                                 500.0, 600.0, 700.0, 800.0};
  int start_stride = 1;
};

struct RteReport {
  std::vector<double> lengths;
  // Per-length means; NaN where no window of that length fits.
  std::vector<double> t_err_percent;
  std::vector<double> r_err_deg_per_m;
  std::vector<int> window_counts;
  // Flat means over every evaluated (start, length) window.
  double t_rte = 0.0;
  double r_rte = 0.0;
  int total_windows = 0;
  // False when the trajectory is shorter than the smallest length.
  bool valid = false;
};

struct PoseReadReport {
  // Rows whose rotation block needed polar re-orthonormalization.
  int reorthonormalized = 0;
};

// KITTI pose format: 12 floats per line, the top three rows of the
// homogeneous world-from-sensor matrix. Rotation blocks off orthonormal
// by more than 1e-3 are rejected; beyond 1e-6 they are re-orthonormalized
// and counted.
Trajectory read_kitti_poses(const std::string& path,
                            PoseReadReport* report = nullptr);
void write_kitti_poses(const Trajectory& trajectory, const std::string& path);

// Devkit-style relative trajectory error: for every start frame and every
// length, the window ends at the first frame whose cumulative ground-truth
// distance from the start reaches the length; errors come from
// inverse(delta_gt) * delta_est, translational in percent, rotational in
// deg/m.
RteReport rte(const Trajectory& gt, const Trajectory& est,
              const RteOptions& options = {});

// Mean over lengths of the mean ||t(delta_gt) - t(delta_est)|| in meters
// over that length's windows (start-frame-relative translations). NaN when
// no window fits.
double rte_loss(const Trajectory& gt, const Trajectory& est,
                const RteOptions& options = {});

void write_rte_csv(const RteReport& report, const std::string& path);
std::string format_rte_table(const RteReport& report);

}  // namespace gloam
