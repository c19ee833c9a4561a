// SPDX-License-Identifier: Apache-2.0
#include "gloam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gloam/parallel.hpp"

namespace gloam {

namespace {

constexpr double kRadToDeg = 180.0 / 3.141592653589793238462643383279502884;

struct Window {
  int start = 0;
  int end = 0;
  int length_index = 0;
};

std::vector<double> cumulative_distances(const Trajectory& gt) {
  std::vector<double> dist(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i) {
    dist[i] =
        dist[i - 1] + (gt.poses[i].translation - gt.poses[i - 1].translation).norm();
  }
  return dist;
}

std::vector<Window> make_windows(const std::vector<double>& dist,
                                 const RteOptions& options) {
  std::vector<Window> windows;
  const int n = static_cast<int>(dist.size());
  for (int start = 0; start < n; start += options.start_stride) {
    for (std::size_t li = 0; li < options.lengths.size(); ++li) {
      const double target = dist[static_cast<std::size_t>(start)] +
                            options.lengths[li];
      // First frame at or beyond the target distance.
      const auto it = std::lower_bound(dist.begin() + start, dist.end(), target);
      if (it == dist.end()) continue;
      windows.push_back(Window{start, static_cast<int>(it - dist.begin()),
                               static_cast<int>(li)});
    }
  }
  return windows;
}

void check_aligned(const Trajectory& gt, const Trajectory& est) {
  if (gt.size() != est.size()) {
    throw std::invalid_argument("rte: trajectory length mismatch");
  }
  if (gt.frame_ids != est.frame_ids) {
    throw std::invalid_argument("rte: frame index mismatch");
  }
  if (gt.size() < 2) throw std::invalid_argument("rte: trajectory too short");
}

}  // namespace

Trajectory read_kitti_poses(const std::string& path, PoseReadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  Trajectory traj;
  int reorthonormalized = 0;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!(ls >> v[i])) {
        throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                                 ": expected 12 values");
      }
    }
    double extra;
    if (ls >> extra) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": more than 12 values");
    }
    PoseSE3 pose;
    pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    pose.translation << v[3], v[7], v[11];
    if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": non-finite value");
    }
    const double ortho_err =
        (pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff();
    if (ortho_err > 1e-3) {
      throw std::runtime_error(path + ": line " + std::to_string(line_number) +
                               ": rotation not orthonormal");
    }
    if (ortho_err > 1e-6) {
      pose.rotation = orthonormalized(pose.rotation);
      ++reorthonormalized;
    }
    traj.push_back(static_cast<int>(traj.size()), pose);
  }
  if (traj.empty()) throw std::runtime_error(path + ": no poses");
  if (report) report->reorthonormalized = reorthonormalized;
  return traj;
}

void write_kitti_poses(const Trajectory& trajectory, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  char buf[64];
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const PoseSE3& pose = trajectory.poses[i];
    double v[12] = {pose.rotation(0, 0), pose.rotation(0, 1), pose.rotation(0, 2),
                    pose.translation.x(), pose.rotation(1, 0), pose.rotation(1, 1),
                    pose.rotation(1, 2), pose.translation.y(), pose.rotation(2, 0),
                    pose.rotation(2, 1), pose.rotation(2, 2), pose.translation.z()};
    for (int j = 0; j < 12; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
      out << buf << (j < 11 ? " " : "\n");
    }
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

RteReport rte(const Trajectory& gt, const Trajectory& est,
              const RteOptions& options) {
  check_aligned(gt, est);

  RteReport report;
  report.lengths = options.lengths;
  const std::size_t n_lengths = options.lengths.size();
  report.t_err_percent.assign(n_lengths,
                              std::numeric_limits<double>::quiet_NaN());
  report.r_err_deg_per_m.assign(n_lengths,
                                std::numeric_limits<double>::quiet_NaN());
  report.window_counts.assign(n_lengths, 0);

  const std::vector<double> dist = cumulative_distances(gt);
  const std::vector<Window> windows = make_windows(dist, options);
  if (windows.empty()) return report;

  std::vector<double> t_err(windows.size());
  std::vector<double> r_err(windows.size());
  parallel_for(windows.size(), [&](std::size_t i) {
    const Window& w = windows[i];
    const std::size_t s = static_cast<std::size_t>(w.start);
    const std::size_t e = static_cast<std::size_t>(w.end);
    const PoseSE3 delta_gt = compose(inverse(gt.poses[s]), gt.poses[e]);
    const PoseSE3 delta_est = compose(inverse(est.poses[s]), est.poses[e]);
    const PoseSE3 error = compose(inverse(delta_gt), delta_est);
    const double len = options.lengths[static_cast<std::size_t>(w.length_index)];
    t_err[i] = error.translation.norm() / len * 100.0;
    r_err[i] = rotation_angle(error.rotation) * kRadToDeg / len;
  });

  std::vector<double> t_sum(n_lengths, 0.0);
  std::vector<double> r_sum(n_lengths, 0.0);
  for (std::size_t li = 0; li < n_lengths; ++li) {
    t_sum[li] = tree_reduce<double>(
        windows.size(),
        [&](std::size_t i) {
          return windows[i].length_index == static_cast<int>(li) ? t_err[i] : 0.0;
        },
        0.0);
    r_sum[li] = tree_reduce<double>(
        windows.size(),
        [&](std::size_t i) {
          return windows[i].length_index == static_cast<int>(li) ? r_err[i] : 0.0;
        },
        0.0);
  }
  for (const Window& w : windows) {
    ++report.window_counts[static_cast<std::size_t>(w.length_index)];
  }
  for (std::size_t li = 0; li < n_lengths; ++li) {
    if (report.window_counts[li] > 0) {
      t_sum[li] /= report.window_counts[li];
      r_sum[li] /= report.window_counts[li];
      report.t_err_percent[li] = t_sum[li];
      report.r_err_deg_per_m[li] = r_sum[li];
    }
  }

  report.total_windows = static_cast<int>(windows.size());
  report.t_rte =
      tree_reduce<double>(windows.size(), [&](std::size_t i) { return t_err[i]; },
                          0.0) /
      static_cast<double>(windows.size());
  report.r_rte =
      tree_reduce<double>(windows.size(), [&](std::size_t i) { return r_err[i]; },
                          0.0) /
      static_cast<double>(windows.size());
  report.valid = true;
  return report;
}

double rte_loss(const Trajectory& gt, const Trajectory& est,
                const RteOptions& options) {
  check_aligned(gt, est);
  const std::vector<double> dist = cumulative_distances(gt);
  const std::vector<Window> windows = make_windows(dist, options);
  if (windows.empty()) return std::numeric_limits<double>::quiet_NaN();

  std::vector<double> err(windows.size());
  parallel_for(windows.size(), [&](std::size_t i) {
    const Window& w = windows[i];
    const std::size_t s = static_cast<std::size_t>(w.start);
    const std::size_t e = static_cast<std::size_t>(w.end);
    const PoseSE3 delta_gt = compose(inverse(gt.poses[s]), gt.poses[e]);
    const PoseSE3 delta_est = compose(inverse(est.poses[s]), est.poses[e]);
    err[i] = (delta_gt.translation - delta_est.translation).norm();
  });

  double total = 0.0;
  int lengths_hit = 0;
  for (std::size_t li = 0; li < options.lengths.size(); ++li) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i].length_index == static_cast<int>(li)) {
        sum += err[i];
        ++count;
      }
    }
    if (count > 0) {
      total += sum / count;
      ++lengths_hit;
    }
  }
  return total / lengths_hit;
}

void write_rte_csv(const RteReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "length_m,t_rte_percent,r_rte_deg_per_m,windows\n";
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < report.lengths.size(); ++i) {
    emit(report.lengths[i]);
    out << ',';
    if (report.window_counts[i] > 0) {
      emit(report.t_err_percent[i]);
      out << ',';
      emit(report.r_err_deg_per_m[i]);
    } else {
      out << ',';
    }
    out << ',' << report.window_counts[i] << '\n';
  }
  out << "overall,";
  if (report.valid) {
    emit(report.t_rte);
    out << ',';
    emit(report.r_rte);
  } else {
    out << ',';
  }
  out << ',' << report.total_windows << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

std::string format_rte_table(const RteReport& report) {
  std::ostringstream os;
  char buf[128];
  os << "length[m]  t_rte[%]   r_rte[deg/m]  windows\n";
  for (std::size_t i = 0; i < report.lengths.size(); ++i) {
    if (report.window_counts[i] > 0) {
      std::snprintf(buf, sizeof(buf), "%9.4g  %8.4f   %11.6f  %7d\n",
                    report.lengths[i], report.t_err_percent[i],
                    report.r_err_deg_per_m[i], report.window_counts[i]);
    } else {
      std::snprintf(buf, sizeof(buf), "%9.4g         -             -  %7d\n",
                    report.lengths[i], report.window_counts[i]);
    }
    os << buf;
  }
  if (report.valid) {
    std::snprintf(buf, sizeof(buf), "  overall  %8.4f   %11.6f  %7d\n",
                  report.t_rte, report.r_rte, report.total_windows);
    os << buf;
  } else {
    os << "  overall: trajectory shorter than the smallest length\n";
  }
  return os.str();
}

}  // namespace gloam
