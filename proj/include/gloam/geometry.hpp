// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace gloam {

// se(3) tangent vector, ordered [rotation; translation].
struct Twist {
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Matrix<double, 6, 1> vector() const;
  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v);
};

// Rigid transform; rotation is kept orthonormal by construction.
struct PoseSE3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseSE3 identity() { return PoseSE3{}; }
  Eigen::Matrix4d matrix() const;
  static PoseSE3 from_matrix(const Eigen::Matrix4d& m);
};

// Symmetric 3x3 matrix stored as its six upper-triangle entries.
struct SymMat3 {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;

  Eigen::Matrix3d matrix() const;
  // Symmetrizes the input as (m + m^T) / 2.
  static SymMat3 from_matrix(const Eigen::Matrix3d& m);
};

// Eigendecomposition of a symmetric 3x3 matrix; eigenvalues ascending,
// eigenvector j in column j, columns orthonormal.
struct EigenDecomp3 {
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

// Exponential map se(3) -> SE(3); switches to a series expansion below
// 1e-8 rad.
PoseSE3 se3_exp(const Twist& xi);

// Logarithm map SE(3) -> se(3); throws std::domain_error for rotations
// within 1e-6 rad of pi where the axis is ill-conditioned.
Twist se3_log(const PoseSE3& pose);

PoseSE3 compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 inverse(const PoseSE3& pose);
Eigen::Vector3d transform_point(const PoseSE3& pose, const Eigen::Vector3d& p);

// Rotation angle in radians from the trace, clamped for numerical safety.
double rotation_angle(const Eigen::Matrix3d& rotation);

// Nearest orthonormal matrix with positive determinant (polar factor).
Eigen::Matrix3d orthonormalized(const Eigen::Matrix3d& m);

// Eigendecomposition with a deterministic sign convention: in each
// eigenvector the entry of largest magnitude (lowest index on ties) is
// made positive. Throws std::invalid_argument on non-finite input.
EigenDecomp3 eig_sym3(const SymMat3& m);

}  // namespace gloam
