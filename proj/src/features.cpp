// SPDX-License-Identifier: Apache-2.0
#include "gloam/features.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "gloam/parallel.hpp"

namespace gloam {

namespace {

constexpr char kFeatureMagic[4] = {'G', 'L', 'F', '1'};

std::vector<Eigen::Vector3d> as_points(const PointCloud& cloud) {
  return cloud.positions;
}

}  // namespace

RawFeatures classical_descriptors(const PointCloud& cloud, const KdTree<3>& tree,
                                  int k) {
  if (k < 3) throw std::invalid_argument("classical_descriptors: k < 3");
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("classical_descriptors: cloud smaller than k");
  }

  double z_min = std::numeric_limits<double>::infinity();
  double z_max = -std::numeric_limits<double>::infinity();
  for (const Eigen::Vector3d& p : cloud.positions) {
    z_min = std::min(z_min, p.z());
    z_max = std::max(z_max, p.z());
  }
  const double z_extent = z_max - z_min;
  const double inv_extent = z_extent > 1e-12 ? 1.0 / z_extent : 0.0;

  RawFeatures out;
  out.values.resize(static_cast<Eigen::Index>(cloud.size()), 8);

  parallel_for(cloud.size(), [&](std::size_t i) {
    thread_local std::vector<Neighbor> nn;
    tree.knn(cloud.positions[i], k, nn);

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const Neighbor& n : nn) mean += cloud.positions[static_cast<std::size_t>(n.index)];
    mean /= static_cast<double>(nn.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Neighbor& n : nn) {
      const Eigen::Vector3d d =
          cloud.positions[static_cast<std::size_t>(n.index)] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nn.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    Eigen::Vector3d lam = solver.eigenvalues().cwiseMax(0.0);  // ascending
    const double total = lam.sum();

    Eigen::Index row = static_cast<Eigen::Index>(i);
    if (total <= 1e-300) {
      out.values.row(row).setZero();
    } else {
      lam /= total;
      const double l1 = lam[0], l2 = lam[1], l3 = lam[2];
      const double entropy = [&] {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) {
          if (lam[j] > 0.0) acc -= lam[j] * std::log(lam[j]);
        }
        return acc;
      }();
      out.values(row, 0) = l3 > 0.0 ? (l3 - l2) / l3 : 0.0;  // linearity
      out.values(row, 1) = l3 > 0.0 ? (l2 - l1) / l3 : 0.0;  // planarity
      out.values(row, 2) = l3 > 0.0 ? l1 / l3 : 0.0;         // sphericity
      out.values(row, 3) = std::cbrt(l1 * l2 * l3);          // omnivariance
      out.values(row, 4) = l3 > 0.0 ? (l3 - l1) / l3 : 0.0;  // anisotropy
      out.values(row, 5) = entropy;                          // eigenentropy
      out.values(row, 6) = l1;                               // surface variation
    }
    out.values(row, 7) = (cloud.positions[i].z() - z_min) * inv_extent;
  });
  return out;
}

RawFeatures classical_descriptors(const PointCloud& cloud, int k) {
  KdTree<3> tree(as_points(cloud));
  return classical_descriptors(cloud, tree, k);
}

RawFeatures load_external_features(const std::string& path,
                                   std::size_t n_points) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open");
  char magic[4] = {};
  std::uint32_t n = 0, d = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw std::runtime_error(path + ": not a GLF1 feature file");
  }
  if (n != n_points) {
    throw std::runtime_error(path + ": feature rows (" + std::to_string(n) +
                             ") do not match point count (" +
                             std::to_string(n_points) + ")");
  }
  if (d == 0) throw std::runtime_error(path + ": zero feature dimension");

  std::vector<float> raw(static_cast<std::size_t>(n) * d);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw std::runtime_error(path + ": truncated feature payload");

  RawFeatures out;
  out.values.resize(n, d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      const float v = raw[static_cast<std::size_t>(i) * d + j];
      if (!std::isfinite(v)) {
        throw std::runtime_error(path + ": non-finite feature value at row " +
                                 std::to_string(i));
      }
      out.values(i, j) = v;
    }
  }
  return out;
}

void save_external_features(const RawFeatures& features,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::uint32_t n = static_cast<std::uint32_t>(features.rows());
  const std::uint32_t d = static_cast<std::uint32_t>(features.cols());
  out.write(kFeatureMagic, 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  std::vector<float> raw(static_cast<std::size_t>(n) * d);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) {
      raw[static_cast<std::size_t>(i) * d + j] =
          static_cast<float>(features.values(i, j));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw std::runtime_error(path + ": write failed");
}

PcaModel pca_fit(const RawFeatures& samples) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 7) throw std::invalid_argument("pca_fit: needs at least 7 rows");
  if (d < 6) throw std::invalid_argument("pca_fit: needs at least 6 columns");
  if (!samples.values.allFinite()) {
    throw std::invalid_argument("pca_fit: non-finite samples");
  }

  PcaModel model;
  model.mean = samples.values.colwise().mean();
  Eigen::MatrixXd centered = samples.values.rowwise() - model.mean.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  const Eigen::MatrixXd v = svd.matrixV();  // d x min(n,d)

  Eigen::VectorXd variances = sv.array().square();
  const double total_var = variances.sum();

  const double tol = sv.size() > 0
                         ? sv[0] * static_cast<double>(std::max(n, d)) *
                               std::numeric_limits<double>::epsilon()
                         : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv[i] > tol) ++rank;
  }
  const int kept = std::min(rank, 6);

  model.projection.resize(6, d);
  model.explained_variance_ratio.setZero();
  for (int i = 0; i < kept; ++i) {
    Eigen::VectorXd dir = v.col(i);
    // Deterministic sign: largest-magnitude entry positive.
    Eigen::Index major = 0;
    dir.cwiseAbs().maxCoeff(&major);
    if (dir[major] < 0.0) dir = -dir;
    model.projection.row(i) = dir.transpose();
    model.explained_variance_ratio[i] =
        total_var > 0.0 ? variances[i] / total_var : 0.0;
  }

  // Complete missing directions from the canonical basis by Gram-Schmidt.
  model.padded_components = 6 - kept;
  int filled = kept;
  for (Eigen::Index axis = 0; axis < d && filled < 6; ++axis) {
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(d);
    cand[axis] = 1.0;
    for (int j = 0; j < filled; ++j) {
      cand -= model.projection.row(j).dot(cand) * model.projection.row(j).transpose();
    }
    const double norm = cand.norm();
    if (norm > 1e-8) {
      model.projection.row(filled) = (cand / norm).transpose();
      ++filled;
    }
  }
  if (filled < 6) throw std::runtime_error("pca_fit: orthonormal completion failed");
  return model;
}

FeatureSet pca_transform(const PcaModel& model, const RawFeatures& raw) {
  if (raw.cols() != model.mean.size()) {
    throw std::invalid_argument("pca_transform: dimension mismatch");
  }
  FeatureSet out;
  out.values.resize(raw.rows(), 6);
  parallel_for(static_cast<std::size_t>(raw.rows()), [&](std::size_t i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    out.values.row(row) =
        (model.projection * (raw.values.row(row).transpose() - model.mean))
            .transpose();
  });
  return out;
}

void save_pca_model(const PcaModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const Eigen::Index d = model.mean.size();
  out << "gloam_pca " << d << " " << model.padded_components << "\n";
  char buf[64];
  auto emit_row = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
      out << buf << (i + 1 < v.size() ? " " : "\n");
    }
  };
  emit_row(model.mean);
  emit_row(model.explained_variance_ratio);
  for (int r = 0; r < 6; ++r) emit_row(model.projection.row(r).transpose());
  if (!out) throw std::runtime_error(path + ": write failed");
}

PcaModel load_pca_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string magic;
  Eigen::Index d = 0;
  int padded = 0;
  in >> magic >> d >> padded;
  if (!in || magic != "gloam_pca" || d < 6) {
    throw std::runtime_error(path + ": malformed pca model");
  }
  PcaModel model;
  model.padded_components = padded;
  model.mean.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) in >> model.mean[i];
  for (int i = 0; i < 6; ++i) in >> model.explained_variance_ratio[i];
  model.projection.resize(6, d);
  for (int r = 0; r < 6; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) in >> model.projection(r, c);
  }
  if (!in) throw std::runtime_error(path + ": truncated pca model");
  return model;
}

}  // namespace gloam
