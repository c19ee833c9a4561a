// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gloam/evaluation.hpp"
#include "gloam/geometry.hpp"
#include "gloam/rng.hpp"
#include "gloam/trajectory.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "gloam_eval_test";
  fs::create_directories(dir);
  return dir;
}

struct ScalarPose {
  oracle::Mat3 r;
  oracle::Vec3 t;
};

ScalarPose to_scalar(const gloam::PoseSE3& pose) {
  ScalarPose out;
  for (int i = 0; i < 3; ++i) {
    out.t[i] = pose.translation[i];
    for (int j = 0; j < 3; ++j) out.r[i][j] = pose.rotation(i, j);
  }
  return out;
}

ScalarPose scalar_relative(const ScalarPose& a, const ScalarPose& b) {
  // a^-1 * b without library pose algebra.
  const oracle::Mat3 rt = oracle::mat_transpose(a.r);
  ScalarPose out;
  out.r = oracle::mat_mul(rt, b.r);
  oracle::Vec3 diff{b.t[0] - a.t[0], b.t[1] - a.t[1], b.t[2] - a.t[2]};
  out.t = oracle::mat_vec(rt, diff);
  return out;
}

double scalar_rotation_angle(const oracle::Mat3& r) {
  const double trace = r[0][0] + r[1][1] + r[2][2];
  const double c = std::min(1.0, std::max(-1.0, (trace - 1.0) / 2.0));
  return std::acos(c);
}

double scalar_norm(const oracle::Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

struct OracleWindow {
  int start = 0;
  int end = 0;
  int length_index = 0;
};

std::vector<OracleWindow> oracle_windows(const gloam::Trajectory& gt,
                                         const std::vector<double>& lengths,
                                         int stride) {
  const int n = static_cast<int>(gt.size());
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i < n; ++i) {
    oracle::Vec3 step;
    for (int c = 0; c < 3; ++c) {
      step[static_cast<std::size_t>(c)] =
          gt.poses[static_cast<std::size_t>(i)].translation[c] -
          gt.poses[static_cast<std::size_t>(i - 1)].translation[c];
    }
    dist[static_cast<std::size_t>(i)] =
        dist[static_cast<std::size_t>(i - 1)] + scalar_norm(step);
  }
  std::vector<OracleWindow> windows;
  for (int start = 0; start < n; start += stride) {
    for (std::size_t li = 0; li < lengths.size(); ++li) {
      const double target = dist[static_cast<std::size_t>(start)] + lengths[li];
      int end = -1;
      for (int e = start; e < n; ++e) {
        if (dist[static_cast<std::size_t>(e)] >= target) {
          end = e;
          break;
        }
      }
      if (end < 0) continue;
      windows.push_back(OracleWindow{start, end, static_cast<int>(li)});
    }
  }
  return windows;
}

struct OracleRte {
  std::vector<double> t_mean;
  std::vector<double> r_mean;
  std::vector<int> counts;
  double t_flat = 0.0;
  double r_flat = 0.0;
  int total = 0;
  double loss = 0.0;
};

OracleRte oracle_rte(const gloam::Trajectory& gt, const gloam::Trajectory& est,
                     const std::vector<double>& lengths, int stride) {
  const std::vector<OracleWindow> windows = oracle_windows(gt, lengths, stride);
  OracleRte out;
  out.t_mean.assign(lengths.size(), std::numeric_limits<double>::quiet_NaN());
  out.r_mean.assign(lengths.size(), std::numeric_limits<double>::quiet_NaN());
  out.counts.assign(lengths.size(), 0);
  out.total = static_cast<int>(windows.size());
  std::vector<double> t_sum(lengths.size(), 0.0);
  std::vector<double> r_sum(lengths.size(), 0.0);
  std::vector<double> loss_sum(lengths.size(), 0.0);
  double t_all = 0.0;
  double r_all = 0.0;
  for (const OracleWindow& w : windows) {
    const ScalarPose gs = to_scalar(gt.poses[static_cast<std::size_t>(w.start)]);
    const ScalarPose ge = to_scalar(gt.poses[static_cast<std::size_t>(w.end)]);
    const ScalarPose es = to_scalar(est.poses[static_cast<std::size_t>(w.start)]);
    const ScalarPose ee = to_scalar(est.poses[static_cast<std::size_t>(w.end)]);
    const ScalarPose delta_gt = scalar_relative(gs, ge);
    const ScalarPose delta_est = scalar_relative(es, ee);
    const ScalarPose err = scalar_relative(delta_gt, delta_est);
    const double len = lengths[static_cast<std::size_t>(w.length_index)];
    const double t = scalar_norm(err.t) / len * 100.0;
    const double r = scalar_rotation_angle(err.r) * (180.0 / M_PI) / len;
    t_sum[static_cast<std::size_t>(w.length_index)] += t;
    r_sum[static_cast<std::size_t>(w.length_index)] += r;
    oracle::Vec3 dt{delta_gt.t[0] - delta_est.t[0], delta_gt.t[1] - delta_est.t[1],
                    delta_gt.t[2] - delta_est.t[2]};
    loss_sum[static_cast<std::size_t>(w.length_index)] += scalar_norm(dt);
    ++out.counts[static_cast<std::size_t>(w.length_index)];
    t_all += t;
    r_all += r;
  }
  double loss_total = 0.0;
  int lengths_hit = 0;
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    if (out.counts[li] == 0) continue;
    out.t_mean[li] = t_sum[li] / out.counts[li];
    out.r_mean[li] = r_sum[li] / out.counts[li];
    loss_total += loss_sum[li] / out.counts[li];
    ++lengths_hit;
  }
  if (out.total > 0) {
    out.t_flat = t_all / out.total;
    out.r_flat = r_all / out.total;
  }
  out.loss = lengths_hit > 0 ? loss_total / lengths_hit
                             : std::numeric_limits<double>::quiet_NaN();
  return out;
}

gloam::Trajectory straight_line(int frames, double step) {
  gloam::Trajectory traj;
  for (int i = 0; i < frames; ++i) {
    gloam::PoseSE3 pose;
    pose.translation = Eigen::Vector3d(step * i, 0.0, 0.0);
    traj.push_back(i, pose);
  }
  return traj;
}

Eigen::Matrix3d yaw_rotation(double angle) {
  Eigen::Matrix3d r;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

gloam::Trajectory random_trajectory(int frames, unsigned seed, double step,
                                    double wiggle) {
  gloam::Rng rng(seed);
  gloam::Trajectory traj;
  gloam::PoseSE3 pose;
  for (int i = 0; i < frames; ++i) {
    traj.push_back(i, pose);
    gloam::Twist twist;
    twist.rotation = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * wiggle;
    twist.translation =
        Eigen::Vector3d(step, rng.normal() * step * 0.2, rng.normal() * step * 0.2);
    pose = gloam::compose(pose, gloam::se3_exp(twist));
  }
  return traj;
}

gloam::Trajectory perturb_trajectory(const gloam::Trajectory& gt, unsigned seed,
                                     double rot_sigma, double trans_sigma) {
  gloam::Rng rng(seed);
  gloam::Trajectory est;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gloam::Twist twist;
    twist.rotation =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * rot_sigma;
    twist.translation =
        Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * trans_sigma;
    est.push_back(gt.frame_ids[i], gloam::compose(gt.poses[i], gloam::se3_exp(twist)));
  }
  return est;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

}  // namespace

TEST_CASE("kitti pose files round-trip bit-exactly") {
  gloam::Trajectory traj = random_trajectory(25, 99, 0.5, 0.1);
  const fs::path path = temp_dir() / "roundtrip.txt";
  gloam::write_kitti_poses(traj, path.string());
  const gloam::Trajectory back = gloam::read_kitti_poses(path.string());
  REQUIRE(back.size() == traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK((back.poses[i].rotation - traj.poses[i].rotation).norm() == 0.0);
    CHECK((back.poses[i].translation - traj.poses[i].translation).norm() == 0.0);
    CHECK(back.frame_ids[i] == static_cast<int>(i));
  }
}

TEST_CASE("pose reader rejects malformed files with line numbers") {
  const fs::path dir = temp_dir();
  const std::string identity =
      "1 0 0 0 0 1 0 0 0 0 1 0\n";

  const fs::path short_row = dir / "short_row.txt";
  write_text(short_row, identity + "1 0 0 0 0 1 0 0 0 0 1\n");
  try {
    gloam::read_kitti_poses(short_row.string());
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("expected 12 values") != std::string::npos);
  }

  const fs::path long_row = dir / "long_row.txt";
  write_text(long_row, identity + identity + "1 0 0 0 0 1 0 0 0 0 1 0 7\n");
  try {
    gloam::read_kitti_poses(long_row.string());
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("more than 12 values") != std::string::npos);
  }

  // Text streams refuse nan/inf tokens, so the row dies at the parse stage.
  const fs::path non_finite = dir / "non_finite.txt";
  write_text(non_finite, "1 0 0 nan 0 1 0 0 0 0 1 0\n");
  CHECK_THROWS_WITH_AS(gloam::read_kitti_poses(non_finite.string()),
                       doctest::Contains("line 1"), std::runtime_error);

  const fs::path bad_rotation = dir / "bad_rotation.txt";
  write_text(bad_rotation, "2 0 0 0 0 2 0 0 0 0 2 0\n");
  CHECK_THROWS_WITH_AS(gloam::read_kitti_poses(bad_rotation.string()),
                       doctest::Contains("not orthonormal"), std::runtime_error);

  const fs::path empty = dir / "empty.txt";
  write_text(empty, "\n  \n");
  CHECK_THROWS_WITH_AS(gloam::read_kitti_poses(empty.string()),
                       doctest::Contains("no poses"), std::runtime_error);

  CHECK_THROWS_WITH_AS(gloam::read_kitti_poses((dir / "missing.txt").string()),
                       doctest::Contains("cannot open"), std::runtime_error);
}

TEST_CASE("slightly skewed rotations are re-orthonormalized and counted") {
  const fs::path dir = temp_dir();

  // Identity with R(0,1) nudged: orthogonality error equals the nudge.
  auto row_with_nudge = [](double nudge) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "1 %.17g 0 0 0 1 0 0 0 0 1 0\n", nudge);
    return std::string(buf);
  };

  const fs::path mild = dir / "mild_skew.txt";
  write_text(mild, row_with_nudge(1e-4) + row_with_nudge(1e-8));
  gloam::PoseReadReport report;
  const gloam::Trajectory traj = gloam::read_kitti_poses(mild.string(), &report);
  CHECK(report.reorthonormalized == 1);
  REQUIRE(traj.size() == 2);
  for (const gloam::PoseSE3& pose : traj.poses) {
    const double ortho_err = (pose.rotation.transpose() * pose.rotation -
                              Eigen::Matrix3d::Identity())
                                 .cwiseAbs()
                                 .maxCoeff();
    CHECK(ortho_err < 1e-6);
  }

  const fs::path severe = dir / "severe_skew.txt";
  write_text(severe, row_with_nudge(5e-2));
  CHECK_THROWS_WITH_AS(gloam::read_kitti_poses(severe.string()),
                       doctest::Contains("not orthonormal"), std::runtime_error);
}

TEST_CASE("identical trajectories score exactly zero") {
  const gloam::Trajectory gt = straight_line(901, 1.0);
  const gloam::RteReport report = gloam::rte(gt, gt);

  CHECK(report.valid);
  CHECK(report.t_rte == 0.0);
  CHECK(report.r_rte == 0.0);
  REQUIRE(report.lengths.size() == 8);
  int expected_total = 0;
  for (std::size_t li = 0; li < report.lengths.size(); ++li) {
    const int expected = 901 - static_cast<int>(report.lengths[li]);
    CHECK(report.window_counts[li] == expected);
    CHECK(report.t_err_percent[li] == 0.0);
    CHECK(report.r_err_deg_per_m[li] == 0.0);
    expected_total += expected;
  }
  CHECK(report.total_windows == expected_total);
  CHECK(gloam::rte_loss(gt, gt) == 0.0);
}

TEST_CASE("uniform 1 percent scale drift scores t_rte of exactly 1 percent") {
  const gloam::Trajectory gt = straight_line(901, 1.0);
  gloam::Trajectory est;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gloam::PoseSE3 pose = gt.poses[i];
    pose.translation *= 1.01;
    est.push_back(gt.frame_ids[i], pose);
  }

  const gloam::RteReport report = gloam::rte(gt, est);
  CHECK(report.valid);
  CHECK(report.t_rte == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.r_rte == doctest::Approx(0.0).epsilon(1e-12));
  for (std::size_t li = 0; li < report.lengths.size(); ++li) {
    CHECK(report.t_err_percent[li] == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Drift of 1 percent of distance accumulates 0.01 m per metre: the loss for
  // a length-L window is 0.01 L, so the mean over lengths is 0.01 * mean(L).
  const double expected_loss = 0.01 * (100 + 200 + 300 + 400 + 500 + 600 + 700 + 800) / 8.0;
  CHECK(gloam::rte_loss(gt, est) == doctest::Approx(expected_loss).epsilon(1e-12));
}

TEST_CASE("constant yaw drift scores the matching deg-per-metre rate") {
  const double deg_per_m = 0.01;
  const double rad_per_m = deg_per_m * M_PI / 180.0;
  const gloam::Trajectory gt = straight_line(901, 1.0);
  gloam::Trajectory est;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gloam::PoseSE3 pose = gt.poses[i];
    pose.rotation = yaw_rotation(rad_per_m * static_cast<double>(i));
    est.push_back(gt.frame_ids[i], pose);
  }

  const gloam::RteReport report = gloam::rte(gt, est);
  CHECK(report.valid);
  CHECK(report.r_rte == doctest::Approx(deg_per_m).epsilon(1e-9));
  for (std::size_t li = 0; li < report.lengths.size(); ++li) {
    CHECK(report.r_err_deg_per_m[li] == doctest::Approx(deg_per_m).epsilon(1e-9));
  }
}

TEST_CASE("rte matches an independent scalar evaluation on curved trajectories") {
  const gloam::Trajectory gt = random_trajectory(300, 17, 0.25, 0.004);
  const gloam::Trajectory est = perturb_trajectory(gt, 18, 0.002, 0.02);
  gloam::RteOptions options;
  options.lengths = {5.0, 10.0, 20.0};
  options.start_stride = 3;

  const gloam::RteReport report = gloam::rte(gt, est, options);
  const OracleRte expected = oracle_rte(gt, est, options.lengths, options.start_stride);

  REQUIRE(report.valid);
  CHECK(report.total_windows == expected.total);
  CHECK(report.t_rte == doctest::Approx(expected.t_flat).epsilon(1e-10));
  CHECK(report.r_rte == doctest::Approx(expected.r_flat).epsilon(1e-10));
  for (std::size_t li = 0; li < options.lengths.size(); ++li) {
    CHECK(report.window_counts[li] == expected.counts[li]);
    CHECK(report.t_err_percent[li] ==
          doctest::Approx(expected.t_mean[li]).epsilon(1e-10));
    CHECK(report.r_err_deg_per_m[li] ==
          doctest::Approx(expected.r_mean[li]).epsilon(1e-10));
  }
  CHECK(gloam::rte_loss(gt, est, options) ==
        doctest::Approx(expected.loss).epsilon(1e-10));
}

TEST_CASE("rte is invariant under a global frame change") {
  const gloam::Trajectory gt = random_trajectory(200, 31, 0.3, 0.003);
  const gloam::Trajectory est = perturb_trajectory(gt, 32, 0.002, 0.02);
  gloam::Twist twist;
  twist.rotation = Eigen::Vector3d(0.4, -0.9, 1.3);
  twist.translation = Eigen::Vector3d(12.0, -7.0, 3.0);
  const gloam::PoseSE3 world_shift = gloam::se3_exp(twist);

  auto shifted = [&](const gloam::Trajectory& traj) {
    gloam::Trajectory out;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      out.push_back(traj.frame_ids[i], gloam::compose(world_shift, traj.poses[i]));
    }
    return out;
  };

  gloam::RteOptions options;
  options.lengths = {5.0, 15.0};
  const gloam::RteReport base = gloam::rte(gt, est, options);
  const gloam::RteReport moved = gloam::rte(shifted(gt), shifted(est), options);

  REQUIRE(base.valid);
  REQUIRE(moved.valid);
  CHECK(moved.total_windows == base.total_windows);
  CHECK(moved.t_rte == doctest::Approx(base.t_rte).epsilon(1e-9));
  CHECK(moved.r_rte == doctest::Approx(base.r_rte).epsilon(1e-9));
  for (std::size_t li = 0; li < options.lengths.size(); ++li) {
    CHECK(moved.window_counts[li] == base.window_counts[li]);
    CHECK(moved.t_err_percent[li] ==
          doctest::Approx(base.t_err_percent[li]).epsilon(1e-9));
  }
}

TEST_CASE("windows end at the first frame reaching the length") {
  // Steps of 0.4 m; a 1.2 m window from frame 0 must end exactly at frame 3.
  gloam::Trajectory gt = straight_line(6, 0.4);
  gloam::Trajectory est = gt;
  est.poses[3].translation.x() += 0.1;

  gloam::RteOptions options;
  options.lengths = {1.2};
  const gloam::RteReport report = gloam::rte(gt, est, options);

  // Starts 0, 1, 2 fit; only the (0 -> 3) window sees the displaced pose.
  REQUIRE(report.window_counts[0] == 3);
  const double displaced = 0.1 / 1.2 * 100.0;
  CHECK(report.t_err_percent[0] == doctest::Approx(displaced / 3.0).epsilon(1e-12));

  options.start_stride = 2;
  const gloam::RteReport strided = gloam::rte(gt, est, options);
  CHECK(strided.window_counts[0] == 2);
  CHECK(strided.t_err_percent[0] == doctest::Approx(displaced / 2.0).epsilon(1e-12));
}

TEST_CASE("short trajectories yield an invalid report and NaN loss") {
  const gloam::Trajectory gt = straight_line(10, 1.0);
  const gloam::RteReport report = gloam::rte(gt, gt);
  CHECK_FALSE(report.valid);
  CHECK(report.total_windows == 0);
  for (std::size_t li = 0; li < report.lengths.size(); ++li) {
    CHECK(report.window_counts[li] == 0);
    CHECK(std::isnan(report.t_err_percent[li]));
    CHECK(std::isnan(report.r_err_deg_per_m[li]));
  }
  CHECK(std::isnan(gloam::rte_loss(gt, gt)));
}

TEST_CASE("rte_loss averages per-length mean translation gaps in metres") {
  gloam::Trajectory gt = straight_line(6, 1.0);
  gloam::Trajectory est = gt;
  est.poses[3].translation.x() += 0.25;
  est.poses[5].translation.x() -= 0.5;

  gloam::RteOptions options;
  options.lengths = {2.0, 4.0};
  // L=2 windows: (0,2)=0, (1,3)=0.25, (2,4)=0, (3,5)=0.75; mean 0.25.
  // L=4 windows: (0,4)=0, (1,5)=0.5; mean 0.25.
  CHECK(gloam::rte_loss(gt, est, options) == 0.25);
}

TEST_CASE("misaligned trajectories are rejected") {
  const gloam::Trajectory gt = straight_line(10, 1.0);

  gloam::Trajectory shorter = straight_line(9, 1.0);
  CHECK_THROWS_AS((void)gloam::rte(gt, shorter), std::invalid_argument);

  gloam::Trajectory renumbered = gt;
  renumbered.frame_ids[4] = 40;
  CHECK_THROWS_AS((void)gloam::rte(gt, renumbered), std::invalid_argument);
  CHECK_THROWS_AS((void)gloam::rte_loss(gt, renumbered), std::invalid_argument);

  const gloam::Trajectory single = straight_line(1, 1.0);
  CHECK_THROWS_AS((void)gloam::rte(single, single), std::invalid_argument);
}

TEST_CASE("csv and table renderings carry the report contents") {
  const gloam::Trajectory gt = straight_line(901, 1.0);
  gloam::Trajectory est;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gloam::PoseSE3 pose = gt.poses[i];
    pose.translation *= 1.01;
    est.push_back(gt.frame_ids[i], pose);
  }
  const gloam::RteReport report = gloam::rte(gt, est);

  const fs::path csv_path = temp_dir() / "report.csv";
  gloam::write_rte_csv(report, csv_path.string());
  std::ifstream in(csv_path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "length_m,t_rte_percent,r_rte_deg_per_m,windows");
  int rows = 0;
  bool saw_overall = false;
  while (std::getline(in, line)) {
    if (line.rfind("overall,", 0) == 0) {
      saw_overall = true;
      CHECK(line.find(",1,") != std::string::npos);
      continue;
    }
    ++rows;
  }
  CHECK(rows == 8);
  CHECK(saw_overall);

  const std::string table = gloam::format_rte_table(report);
  CHECK(table.find("length[m]") != std::string::npos);
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("1.0000") != std::string::npos);

  // An invalid report renders dashes, not numbers.
  const gloam::Trajectory tiny = straight_line(5, 1.0);
  const gloam::RteReport invalid = gloam::rte(tiny, tiny);
  const std::string empty_table = gloam::format_rte_table(invalid);
  CHECK(empty_table.find("shorter than the smallest length") != std::string::npos);
  const fs::path invalid_csv = temp_dir() / "invalid.csv";
  gloam::write_rte_csv(invalid, invalid_csv.string());
  std::ifstream in2(invalid_csv);
  std::getline(in2, line);
  int zero_rows = 0;
  while (std::getline(in2, line)) {
    if (line.rfind("overall,", 0) == 0) {
      CHECK(line == "overall,,,0");
    } else {
      CHECK(line.substr(line.size() - 2) == ",0");
      ++zero_rows;
    }
  }
  CHECK(zero_rows == 8);
}
