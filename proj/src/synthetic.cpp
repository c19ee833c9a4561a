// SPDX-License-Identifier: Apache-2.0
#include "gloam/synthetic.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gloam/rng.hpp"

namespace gloam {

namespace {

constexpr double kDegToRad = 3.141592653589793238462643383279502884 / 180.0;
constexpr double kRayEps = 1e-9;

double hit_plane(const SynthPlane& plane, const Eigen::Vector3d& o,
                 const Eigen::Vector3d& d) {
  const Eigen::Vector3d n = plane.normal();
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-12) return -1.0;
  const double t = n.dot(plane.origin - o) / denom;
  if (t <= kRayEps) return -1.0;
  const Eigen::Vector3d local = o + t * d - plane.origin;
  if (std::abs(local.dot(plane.u_axis)) > plane.half_u) return -1.0;
  if (std::abs(local.dot(plane.v_axis)) > plane.half_v) return -1.0;
  return t;
}

double hit_cylinder(const SynthCylinder& cyl, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d) {
  const Eigen::Vector3d& a = cyl.axis;
  const Eigen::Vector3d w = o - cyl.base;
  const Eigen::Vector3d d_perp = d - d.dot(a) * a;
  const Eigen::Vector3d w_perp = w - w.dot(a) * a;
  const double qa = d_perp.squaredNorm();
  if (qa < 1e-18) return -1.0;
  const double qb = 2.0 * w_perp.dot(d_perp);
  const double qc = w_perp.squaredNorm() - cyl.radius * cyl.radius;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return -1.0;
  const double root = std::sqrt(disc);
  for (const double t : {(-qb - root) / (2.0 * qa), (-qb + root) / (2.0 * qa)}) {
    if (t <= kRayEps) continue;
    const double along = (o + t * d - cyl.base).dot(a);
    if (along >= 0.0 && along <= cyl.height) return t;
  }
  return -1.0;
}

double hit_sphere(const SynthSphere& sph, const Eigen::Vector3d& o,
                  const Eigen::Vector3d& d) {
  const Eigen::Vector3d w = o - sph.center;
  const double qb = 2.0 * w.dot(d);
  const double qc = w.squaredNorm() - sph.radius * sph.radius;
  const double disc = qb * qb - 4.0 * qc;
  if (disc < 0.0) return -1.0;
  const double root = std::sqrt(disc);
  for (const double t : {(-qb - root) / 2.0, (-qb + root) / 2.0}) {
    if (t > kRayEps) return t;
  }
  return -1.0;
}

}  // namespace

double synth_raycast(const SynthWorld& spec, const Eigen::Vector3d& origin,
                     const Eigen::Vector3d& direction) {
  double best = std::numeric_limits<double>::infinity();
  for (const SynthPlane& p : spec.planes) {
    const double t = hit_plane(p, origin, direction);
    if (t > 0.0 && t < best) best = t;
  }
  for (const SynthCylinder& c : spec.cylinders) {
    const double t = hit_cylinder(c, origin, direction);
    if (t > 0.0 && t < best) best = t;
  }
  for (const SynthSphere& s : spec.spheres) {
    const double t = hit_sphere(s, origin, direction);
    if (t > 0.0 && t < best) best = t;
  }
  if (!std::isfinite(best) || best > spec.max_range) return -1.0;
  return best;
}

SynthResult synth_world(const SynthWorld& spec, std::uint64_t seed) {
  if (spec.path.empty()) throw std::invalid_argument("synth_world: empty path");
  if (spec.pattern.azimuth_count < 1 || spec.pattern.elevations_deg.empty()) {
    throw std::invalid_argument("synth_world: empty scan pattern");
  }

  const double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  const std::size_t rays = spec.pattern.elevations_deg.size() *
                           static_cast<std::size_t>(spec.pattern.azimuth_count);

  SynthResult result;
  result.scans.reserve(spec.path.size());
  std::vector<Eigen::Vector3d> directions;
  directions.reserve(rays);
  for (std::size_t k = 0; k < spec.path.size(); ++k) {
    const PoseSE3& pose = spec.path[k];
    Rng rng(mix_seed(seed, k));
    // Spin-phase dither: without it a static world resamples onto bitwise
    // identical sensor-frame points, which aliases registration.
    const double phase = rng.uniform01();
    directions.clear();
    for (const double elev_deg : spec.pattern.elevations_deg) {
      const double elev = elev_deg * kDegToRad;
      const double ce = std::cos(elev);
      const double se = std::sin(elev);
      for (int a = 0; a < spec.pattern.azimuth_count; ++a) {
        const double az = two_pi * (static_cast<double>(a) + phase) /
                          static_cast<double>(spec.pattern.azimuth_count);
        directions.emplace_back(ce * std::cos(az), ce * std::sin(az), se);
      }
    }
    PointCloud scan;
    scan.frame_id = static_cast<int>(k);
    scan.positions.reserve(directions.size());
    for (const Eigen::Vector3d& dir : directions) {
      const Eigen::Vector3d world_dir = pose.rotation * dir;
      const double range = synth_raycast(spec, pose.translation, world_dir);
      // One noise draw per ray keeps the stream aligned across worlds.
      const double noise = spec.noise_sigma > 0.0
                               ? rng.normal(0.0, spec.noise_sigma)
                               : 0.0;
      if (range < 0.0) continue;
      const double measured = range + noise;
      if (measured < spec.min_range || measured > spec.max_range) continue;
      scan.positions.push_back(dir * measured);
    }
    result.scans.push_back(std::move(scan));
    result.ground_truth.push_back(static_cast<int>(k), pose);
  }
  return result;
}

SynthWorld corridor_world(int frame_count, double step, double noise_sigma) {
  SynthWorld world;
  world.noise_sigma = noise_sigma;
  // Clipped range plus dense low beams keep adjacent ground rings inside
  // one covariance neighborhood; grazing far-field rings degenerate into
  // isolated line-like strands that alias plane fitting.
  world.max_range = 16.0;
  world.pattern.elevations_deg = {-15.0, -14.0, -13.0, -12.0, -11.0, -10.0,
                                  -9.0,  -8.0,  -7.0,  -6.0,  -5.0,  -4.0,
                                  -3.0,  0.0,   3.0,   8.0};

  const double length = std::max(80.0, frame_count * step + 40.0);
  const double half_len = length / 2.0;
  const double half_width = 4.0;

  SynthPlane ground;
  ground.origin = Eigen::Vector3d(half_len - 20.0, 0.0, 0.0);
  ground.u_axis = Eigen::Vector3d::UnitX();
  ground.v_axis = Eigen::Vector3d::UnitY();
  ground.half_u = half_len + 20.0;
  ground.half_v = half_width;
  world.planes.push_back(ground);

  for (const double side : {-half_width, half_width}) {
    SynthPlane wall;
    wall.origin = Eigen::Vector3d(half_len - 20.0, side, 1.5);
    wall.u_axis = Eigen::Vector3d::UnitX();
    wall.v_axis = Eigen::Vector3d::UnitZ();
    wall.half_u = half_len + 20.0;
    wall.half_v = 1.5;
    world.planes.push_back(wall);
  }

  // Without structure facing the travel direction the corridor is
  // translation-symmetric along x and odometry is unobservable: end caps
  // and wall baffles provide that constraint.
  for (const double cap_x : {-12.0, frame_count * step + 12.0}) {
    SynthPlane cap;
    cap.origin = Eigen::Vector3d(cap_x, 0.0, 1.5);
    cap.u_axis = Eigen::Vector3d::UnitY();
    cap.v_axis = Eigen::Vector3d::UnitZ();
    cap.half_u = half_width;
    cap.half_v = 1.5;
    world.planes.push_back(cap);
  }
  const int baffle_count = 4 + static_cast<int>(frame_count * step / 6.0);
  for (int i = 0; i < baffle_count; ++i) {
    SynthPlane baffle;
    const double side = (i % 2 == 0) ? half_width - 0.8 : -(half_width - 0.8);
    baffle.origin = Eigen::Vector3d(-8.0 + 6.0 * i, side, 1.5);
    baffle.u_axis = Eigen::Vector3d::UnitY();
    baffle.v_axis = Eigen::Vector3d::UnitZ();
    baffle.half_u = 0.8;
    baffle.half_v = 1.5;
    world.planes.push_back(baffle);
  }

  for (int i = 0; i < 14; ++i) {
    SynthCylinder pole;
    const double side = (i % 2 == 0) ? -half_width + 1.0 : half_width - 1.0;
    pole.base = Eigen::Vector3d(-10.0 + 7.0 * i, side, 0.0);
    pole.axis = Eigen::Vector3d::UnitZ();
    pole.radius = 0.3;
    pole.height = 2.8;
    world.cylinders.push_back(pole);
  }

  for (int i = 0; i < 5; ++i) {
    SynthSphere blob;
    const double side = (i % 2 == 0) ? half_width - 0.8 : -half_width + 0.8;
    blob.center = Eigen::Vector3d(-5.0 + 16.0 * i, side, 2.2);
    blob.radius = 0.6;
    world.spheres.push_back(blob);
  }

  world.path.reserve(static_cast<std::size_t>(frame_count));
  for (int k = 0; k < frame_count; ++k) {
    PoseSE3 pose;
    const double x = step * static_cast<double>(k);
    const double sway = 0.15 * std::sin(0.08 * x);
    const double yaw = 0.012 * std::cos(0.08 * x);
    pose.translation = Eigen::Vector3d(x, sway, 1.2);
    pose.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())
                        .toRotationMatrix();
    world.path.push_back(pose);
  }
  return world;
}

}  // namespace gloam
