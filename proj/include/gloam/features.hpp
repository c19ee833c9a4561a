// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <string>

#include "gloam/kdtree.hpp"
#include "gloam/point_cloud.hpp"

namespace gloam {

// Per-point raw descriptors, one row per point. The built-in backbone
// emits 8 columns; external files typically carry 32 or 128.
struct RawFeatures {
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Per-point compressed 6-D features, one row per point.
struct FeatureSet {
  Eigen::Matrix<double, Eigen::Dynamic, 6> values;

  Eigen::Index rows() const { return values.rows(); }
};

struct PcaModel {
  Eigen::VectorXd mean;                                  // D
  Eigen::Matrix<double, 6, Eigen::Dynamic> projection;   // 6 x D, orthonormal rows
  Eigen::Matrix<double, 6, 1> explained_variance_ratio;  // nonincreasing
  // Number of trailing directions that had to be completed orthonormally
  // because the data rank was below 6; their variance ratio is zero.
  int padded_components = 0;
};

// Eigenvalue-shape descriptors from the k-NN covariance of each point:
// linearity, planarity, sphericity, omnivariance, anisotropy,
// eigenentropy, surface variation, normalized height. Eigenvalues are
// normalized to unit sum; a fully degenerate neighborhood yields zeros in
// the seven shape channels with height still defined.
RawFeatures classical_descriptors(const PointCloud& cloud, const KdTree<3>& tree,
                                  int k);
RawFeatures classical_descriptors(const PointCloud& cloud, int k);

// GLF1 container: magic "GLF1", u32 N, u32 D, then N*D float32 values
// row-major, all little-endian.
RawFeatures load_external_features(const std::string& path,
                                   std::size_t n_points);
void save_external_features(const RawFeatures& features,
                            const std::string& path);

// Mean-centered SVD; keeps the top 6 right singular directions and pads
// with an orthonormal completion when the sample rank is below 6.
// Requires at least 7 rows and D >= 6.
PcaModel pca_fit(const RawFeatures& samples);

// (raw - mean) * projection^T, row-parallel.
FeatureSet pca_transform(const PcaModel& model, const RawFeatures& raw);

void save_pca_model(const PcaModel& model, const std::string& path);
PcaModel load_pca_model(const std::string& path);

}  // namespace gloam
