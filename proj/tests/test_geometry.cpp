// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "gloam/geometry.hpp"
#include "gloam/rng.hpp"
#include "oracles.hpp"

namespace {

oracle::Mat3 to_mat3(const Eigen::Matrix3d& m) {
  oracle::Mat3 out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r][c] = m(r, c);
  return out;
}

Eigen::Matrix3d from_mat3(const oracle::Mat3& m) {
  Eigen::Matrix3d out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out(r, c) = m[r][c];
  return out;
}

gloam::Twist random_twist(gloam::Rng& rng, double max_angle) {
  gloam::Twist t;
  for (int i = 0; i < 3; ++i) {
    t.rotation[i] = rng.uniform(-1.0, 1.0);
    t.translation[i] = rng.uniform(-5.0, 5.0);
  }
  const double norm = t.rotation.norm();
  if (norm > 0.0) t.rotation *= rng.uniform(0.0, max_angle) / norm;
  return t;
}

// V(omega) v = (integral_0^1 R(s omega) ds) v by Simpson's rule over the
// oracle Rodrigues rotation; an integral form of the exponential's
// translation factor that shares no series code with the library.
Eigen::Vector3d integrated_translation(const Eigen::Vector3d& omega,
                                       const Eigen::Vector3d& v) {
  constexpr int kPanels = 2000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  auto sample = [&](double s) {
    const oracle::Mat3 r =
        oracle::rodrigues({s * omega.x(), s * omega.y(), s * omega.z()});
    const oracle::Vec3 out = oracle::mat_vec(r, {v.x(), v.y(), v.z()});
    return Eigen::Vector3d(out[0], out[1], out[2]);
  };
  const double h = 1.0 / kPanels;
  sum += sample(0.0) + sample(1.0);
  for (int i = 1; i < kPanels; ++i)
    sum += (i % 2 == 1 ? 4.0 : 2.0) * sample(i * h);
  return sum * (h / 3.0);
}

}  // namespace

TEST_CASE("skew matrix reproduces the cross product") {
  gloam::Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::Vector3d a(rng.uniform(-2, 2), rng.uniform(-2, 2),
                      rng.uniform(-2, 2));
    Eigen::Vector3d b(rng.uniform(-2, 2), rng.uniform(-2, 2),
                      rng.uniform(-2, 2));
    const Eigen::Matrix3d s = gloam::skew(a);
    CHECK((s * b - a.cross(b)).norm() < 1e-15);
    CHECK((s + s.transpose()).norm() == 0.0);
  }
}

TEST_CASE("twist vector stacks rotation before translation") {
  gloam::Twist t;
  t.rotation = Eigen::Vector3d(1, 2, 3);
  t.translation = Eigen::Vector3d(4, 5, 6);
  const auto v = t.vector();
  for (int i = 0; i < 6; ++i) CHECK(v[i] == double(i + 1));
  const gloam::Twist back = gloam::Twist::from_vector(v);
  CHECK(back.rotation == t.rotation);
  CHECK(back.translation == t.translation);
}

TEST_CASE("exponential of the zero twist is the identity pose") {
  const gloam::PoseSE3 pose = gloam::se3_exp(gloam::Twist{});
  CHECK((pose.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(pose.translation.norm() == 0.0);
}

TEST_CASE("exponential of a pure translation leaves rotation alone") {
  gloam::Twist t;
  t.translation = Eigen::Vector3d(0.5, -2.0, 3.25);
  const gloam::PoseSE3 pose = gloam::se3_exp(t);
  CHECK((pose.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-15);
  CHECK((pose.translation - t.translation).norm() < 1e-15);
}

TEST_CASE("exponential rotation matches the Rodrigues oracle") {
  gloam::Rng rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const gloam::Twist t = random_twist(rng, 3.0);
    const Eigen::Matrix3d expected = from_mat3(oracle::rodrigues(
        {t.rotation.x(), t.rotation.y(), t.rotation.z()}));
    const gloam::PoseSE3 pose = gloam::se3_exp(t);
    worst = std::max(worst, (pose.rotation - expected).norm());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("exponential translation matches the integral oracle") {
  gloam::Rng rng(13);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const gloam::Twist t = random_twist(rng, 3.0);
    const Eigen::Vector3d expected =
        integrated_translation(t.rotation, t.translation);
    const gloam::PoseSE3 pose = gloam::se3_exp(t);
    worst = std::max(worst, (pose.translation - expected).norm());
  }
  CHECK(worst < 1e-10);

  // Small angles run the series branch; the integral oracle still applies.
  for (int trial = 0; trial < 50; ++trial) {
    gloam::Twist t = random_twist(rng, 1e-9);
    const Eigen::Vector3d expected =
        integrated_translation(t.rotation, t.translation);
    CHECK((gloam::se3_exp(t).translation - expected).norm() < 1e-12);
  }
}

TEST_CASE("logarithm inverts the exponential") {
  gloam::Rng rng(14);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const gloam::Twist t = random_twist(rng, M_PI - 1e-3);
    const gloam::Twist back = gloam::se3_log(gloam::se3_exp(t));
    worst = std::max(worst, (back.vector() - t.vector()).norm());
  }
  CHECK(worst < 1e-9);

  const gloam::Twist zero = gloam::se3_log(gloam::PoseSE3::identity());
  CHECK(zero.vector().norm() == 0.0);
}

TEST_CASE("logarithm rejects rotations at pi") {
  gloam::Twist t;
  t.rotation = Eigen::Vector3d(M_PI, 0, 0);
  const gloam::PoseSE3 pose = gloam::se3_exp(t);
  CHECK_THROWS_AS((void)gloam::se3_log(pose), std::domain_error);
}

TEST_CASE("compose and inverse agree with homogeneous matrix algebra") {
  gloam::Rng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const gloam::PoseSE3 a = gloam::se3_exp(random_twist(rng, 2.5));
    const gloam::PoseSE3 b = gloam::se3_exp(random_twist(rng, 2.5));
    Eigen::Matrix4d ma = Eigen::Matrix4d::Identity();
    Eigen::Matrix4d mb = Eigen::Matrix4d::Identity();
    ma.topLeftCorner<3, 3>() = a.rotation;
    ma.topRightCorner<3, 1>() = a.translation;
    mb.topLeftCorner<3, 3>() = b.rotation;
    mb.topRightCorner<3, 1>() = b.translation;

    const gloam::PoseSE3 ab = gloam::compose(a, b);
    CHECK((ab.matrix() - ma * mb).norm() < 1e-12);

    const gloam::PoseSE3 ia = gloam::inverse(a);
    CHECK((ia.matrix() * ma - Eigen::Matrix4d::Identity()).norm() < 1e-12);

    const Eigen::Vector3d p(rng.uniform(-10, 10), rng.uniform(-10, 10),
                            rng.uniform(-10, 10));
    const Eigen::Vector4d hp = ma * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
    CHECK((gloam::transform_point(a, p) - hp.head<3>()).norm() < 1e-12);

    const gloam::PoseSE3 round = gloam::PoseSE3::from_matrix(ab.matrix());
    CHECK((round.rotation - ab.rotation).norm() == 0.0);
    CHECK((round.translation - ab.translation).norm() == 0.0);
  }
}

TEST_CASE("rotation angle recovers the axis-angle magnitude") {
  gloam::Rng rng(16);
  CHECK(gloam::rotation_angle(Eigen::Matrix3d::Identity()) == 0.0);
  for (int trial = 0; trial < 200; ++trial) {
    gloam::Twist t = random_twist(rng, M_PI - 1e-4);
    const double angle = t.rotation.norm();
    const double got = gloam::rotation_angle(gloam::se3_exp(t).rotation);
    CHECK(std::abs(got - angle) < 1e-7);
  }
}

TEST_CASE("orthonormalized projects a perturbed rotation back to SO(3)") {
  gloam::Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Matrix3d r = gloam::se3_exp(random_twist(rng, 3.0)).rotation;
    Eigen::Matrix3d noisy = r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) noisy(i, j) += rng.uniform(-1e-4, 1e-4);
    const Eigen::Matrix3d fixed = gloam::orthonormalized(noisy);
    CHECK((fixed.transpose() * fixed - Eigen::Matrix3d::Identity()).norm() <
          1e-12);
    CHECK(fixed.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((fixed - r).norm() < 1e-3);
  }
}

TEST_CASE("symmetric eigendecomposition matches the Jacobi oracle") {
  gloam::Rng rng(18);
  double worst_value = 0.0;
  double worst_recon = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    Eigen::Matrix3d b;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) b(i, j) = rng.uniform(-2, 2);
    const Eigen::Matrix3d m = b.transpose() * b;

    const gloam::EigenDecomp3 got =
        gloam::eig_sym3(gloam::SymMat3::from_matrix(m));
    const oracle::Eig3 want = oracle::jacobi_eig3(to_mat3(m));

    CHECK(got.eigenvalues[0] <= got.eigenvalues[1]);
    CHECK(got.eigenvalues[1] <= got.eigenvalues[2]);
    for (int i = 0; i < 3; ++i)
      worst_value =
          std::max(worst_value, std::abs(got.eigenvalues[i] - want.values[i]));

    const Eigen::Matrix3d recon = got.eigenvectors *
                                  got.eigenvalues.asDiagonal() *
                                  got.eigenvectors.transpose();
    worst_recon = std::max(worst_recon, (recon - m).norm() / m.norm());

    const Eigen::Matrix3d gram =
        got.eigenvectors.transpose() * got.eigenvectors;
    CHECK((gram - Eigen::Matrix3d::Identity()).norm() < 1e-12);

    for (int c = 0; c < 3; ++c) {
      int arg = 0;
      got.eigenvectors.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(got.eigenvectors(arg, c) > 0.0);
    }
  }
  CHECK(worst_value < 1e-10);
  CHECK(worst_recon < 1e-12);
}

TEST_CASE("symmetric eigendecomposition rejects non-finite input") {
  gloam::SymMat3 m;
  m.xx = m.yy = m.zz = 1.0;
  m.yz = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)gloam::eig_sym3(m), std::invalid_argument);
}

TEST_CASE("symmetric matrix value type round-trips") {
  Eigen::Matrix3d m;
  m << 4, 1, 2, 1, 5, 3, 2, 3, 6;
  const gloam::SymMat3 s = gloam::SymMat3::from_matrix(m);
  CHECK((s.matrix() - m).norm() == 0.0);
}
