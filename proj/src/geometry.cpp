// SPDX-License-Identifier: Apache-2.0
#include "gloam/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace gloam {

namespace {
constexpr double kSmallAngle = 1e-8;
constexpr double kPi = 3.141592653589793238462643383279502884;
}  // namespace

Eigen::Matrix<double, 6, 1> Twist::vector() const {
  Eigen::Matrix<double, 6, 1> v;
  v.head<3>() = rotation;
  v.tail<3>() = translation;
  return v;
}

Twist Twist::from_vector(const Eigen::Matrix<double, 6, 1>& v) {
  Twist xi;
  xi.rotation = v.head<3>();
  xi.translation = v.tail<3>();
  return xi;
}

Eigen::Matrix4d PoseSE3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

PoseSE3 PoseSE3::from_matrix(const Eigen::Matrix4d& m) {
  PoseSE3 pose;
  pose.rotation = m.topLeftCorner<3, 3>();
  pose.translation = m.topRightCorner<3, 1>();
  return pose;
}

Eigen::Matrix3d SymMat3::matrix() const {
  Eigen::Matrix3d m;
  m << xx, xy, xz, xy, yy, yz, xz, yz, zz;
  return m;
}

SymMat3 SymMat3::from_matrix(const Eigen::Matrix3d& m) {
  SymMat3 s;
  s.xx = m(0, 0);
  s.yy = m(1, 1);
  s.zz = m(2, 2);
  s.xy = 0.5 * (m(0, 1) + m(1, 0));
  s.xz = 0.5 * (m(0, 2) + m(2, 0));
  s.yz = 0.5 * (m(1, 2) + m(2, 1));
  return s;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

PoseSE3 se3_exp(const Twist& xi) {
  const Eigen::Vector3d& w = xi.rotation;
  const double theta = w.norm();
  const Eigen::Matrix3d W = skew(w);
  const Eigen::Matrix3d W2 = W * W;

  double a = 0.0;  // sin(t)/t
  double b = 0.0;  // (1-cos(t))/t^2
  double c = 0.0;  // (t-sin(t))/t^3
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
    c = 1.0 / 6.0 - t2 / 120.0;
  } else {
    const double t2 = theta * theta;
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }

  PoseSE3 pose;
  pose.rotation = Eigen::Matrix3d::Identity() + a * W + b * W2;
  const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() + b * W + c * W2;
  pose.translation = V * xi.translation;
  return pose;
}

Twist se3_log(const PoseSE3& pose) {
  const Eigen::Matrix3d& R = pose.rotation;
  const double cos_theta =
      std::min(1.0, std::max(-1.0, (R.trace() - 1.0) * 0.5));
  const double theta = std::acos(cos_theta);
  if (theta > kPi - 1e-6) {
    throw std::domain_error("se3_log: rotation too close to pi");
  }

  Eigen::Vector3d axis_raw;
  axis_raw << R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1);

  Twist xi;
  Eigen::Matrix3d v_inv = Eigen::Matrix3d::Identity();
  if (theta < kSmallAngle) {
    xi.rotation = 0.5 * axis_raw;
    const Eigen::Matrix3d W = skew(xi.rotation);
    v_inv -= 0.5 * W;
    v_inv += (1.0 / 12.0) * W * W;
  } else {
    xi.rotation = (theta / (2.0 * std::sin(theta))) * axis_raw;
    const Eigen::Matrix3d W = skew(xi.rotation);
    const double t2 = theta * theta;
    const double k =
        1.0 / t2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
    v_inv -= 0.5 * W;
    v_inv += k * W * W;
  }
  xi.translation = v_inv * pose.translation;
  return xi;
}

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b) {
  PoseSE3 out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

PoseSE3 inverse(const PoseSE3& pose) {
  PoseSE3 out;
  out.rotation = pose.rotation.transpose();
  out.translation = -(out.rotation * pose.translation);
  return out;
}

Eigen::Vector3d transform_point(const PoseSE3& pose, const Eigen::Vector3d& p) {
  return pose.rotation * p + pose.translation;
}

double rotation_angle(const Eigen::Matrix3d& rotation) {
  const double c = std::min(1.0, std::max(-1.0, (rotation.trace() - 1.0) * 0.5));
  return std::acos(c);
}

Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) = -u.col(2);
  }
  return u * v.transpose();
}

EigenDecomp3 eig_sym3(const SymMat3& m) {
  const Eigen::Matrix3d mat = m.matrix();
  if (!mat.allFinite()) {
    throw std::invalid_argument("eig_sym3: non-finite input");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(mat);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eig_sym3: eigensolver failed");
  }
  EigenDecomp3 out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  for (int j = 0; j < 3; ++j) {
    int major = 0;
    double best = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double mag = std::abs(out.eigenvectors(i, j));
      if (mag > best) {
        best = mag;
        major = i;
      }
    }
    if (out.eigenvectors(major, j) < 0.0) {
      out.eigenvectors.col(j) = -out.eigenvectors.col(j);
    }
  }
  return out;
}

}  // namespace gloam
