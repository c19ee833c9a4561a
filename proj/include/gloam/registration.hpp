// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "gloam/features.hpp"
#include "gloam/geometry.hpp"
#include "gloam/kdtree.hpp"
#include "gloam/mlp.hpp"
#include "gloam/point_cloud.hpp"

namespace gloam {

enum class AssociationMode { kEuclidean, kFeatureExtended };
enum class CovarianceMode { kPlane, kLearned };

std::string to_string(AssociationMode mode);
std::string to_string(CovarianceMode mode);
AssociationMode association_mode_from_string(const std::string& s);
CovarianceMode covariance_mode_from_string(const std::string& s);

struct RegistrationConfig {
  AssociationMode association = AssociationMode::kEuclidean;
  CovarianceMode covariance = CovarianceMode::kPlane;
  int covariance_neighbors = 20;
  double eigenvalue_floor = 1e-3;
  double max_correspondence_distance = 2.0;
  int lm_max_inner_iterations = 50;
  int max_outer_iterations = 20;
  double convergence_tolerance = 1e-6;
  double lm_initial_lambda = 1e-4;
  double lm_lambda_scale = 10.0;
};

// Search structure over association vectors: 3-D (positions) or 6-D
// (position + converted feature).
using AssociationTree = std::variant<KdTree<3>, KdTree<6>>;

// A point cloud with per-point Gaussian models and optional association
// data for nearest-neighbor matching.
struct GaussianCloud {
  PointCloud cloud;
  std::vector<SymMat3> covariances;
  // N x 3 or N x 6; zero rows until set_association_vectors is called.
  Eigen::MatrixXd association_vectors;
  std::shared_ptr<const AssociationTree> association_tree;
  // Points whose neighborhood was fully coincident and fell back to eps*I.
  int degenerate_count = 0;

  std::size_t size() const { return cloud.size(); }
};

struct Correspondence {
  int source = -1;
  int target = -1;
  double sq_dist = 0.0;
};

struct Correspondences {
  std::vector<Correspondence> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

struct RegistrationResult {
  PoseSE3 pose;
  double final_cost = 0.0;
  int iterations = 0;
  int inlier_count = 0;
  bool converged = false;
  std::string message;
};

// Raw neighborhood eigenstructure, computed once per scan and reusable
// across covariance modes and MLP weight settings.
struct CovarianceBasis {
  std::vector<EigenDecomp3> decomps;
  std::vector<std::uint8_t> degenerate;
  int degenerate_count = 0;
};

// k-NN sample covariance (biased, divided by k) of each point, then
// eigendecomposition. Neighborhoods whose largest eigenvalue vanishes are
// marked degenerate.
CovarianceBasis covariance_basis(const PointCloud& cloud, const KdTree<3>& tree,
                                 int k);

// Plane regularization: eigenvalues replaced with (eps, 1, 1) in ascending
// pairing with the original eigenvectors. Degenerate points get eps*I.
std::vector<SymMat3> plane_covariances(const CovarianceBasis& basis,
                                       double epsilon);

// Learned regularization: eigenvalues from the MLP, sorted ascending,
// floored at eps, L2-normalized, recombined with the original eigenvectors.
std::vector<SymMat3> learned_covariances(const CovarianceBasis& basis,
                                         const FeatureSet& features,
                                         const MlpWeights& weights,
                                         double epsilon);

GaussianCloud estimate_covariances_plane(const PointCloud& cloud, int k,
                                         double epsilon);
GaussianCloud estimate_covariances_learned(const PointCloud& cloud,
                                           const FeatureSet& features,
                                           const MlpWeights& weights, int k,
                                           double epsilon);

// Fills association_vectors (positions, or position + converted feature)
// and builds the nearest-neighbor tree over them. features/conversion are
// required only in feature-extended mode.
void set_association_vectors(GaussianCloud& cloud, AssociationMode mode,
                             const FeatureSet* features = nullptr,
                             const MlpWeights* conversion = nullptr);

// 1-NN of every source point in the target's association space; the source
// position is moved by `pose` first, feature channels are left unchanged.
// Pairs beyond the max correspondence distance are discarded.
Correspondences associate(const GaussianCloud& source,
                          const GaussianCloud& target, const PoseSE3& pose,
                          const RegistrationConfig& cfg);

struct CostTerms {
  double cost = 0.0;
  Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
  int dropped = 0;
};

// Eq.-style distribution-to-distribution cost: sum of d^T (C_B + R C_A
// R^T)^-1 d over pairs, with Gauss-Newton gradient and approximate Hessian
// under a left perturbation exp(xi)*T, treating each M as constant.
// Gradient/Hessian ordering matches Twist: [rotation; translation].
CostTerms gicp_cost_and_gradient(const GaussianCloud& source,
                                 const GaussianCloud& target,
                                 const Correspondences& corr,
                                 const PoseSE3& pose);

double gicp_cost(const GaussianCloud& source, const GaussianCloud& target,
                 const Correspondences& corr, const PoseSE3& pose,
                 int* dropped = nullptr);

// Per-pair Mahalanobis terms in correspondence order.
std::vector<double> gicp_pair_costs(const GaussianCloud& source,
                                    const GaussianCloud& target,
                                    const Correspondences& corr,
                                    const PoseSE3& pose);

// Alternates association and Levenberg-Marquardt steps until the accepted
// step norm falls below tolerance. Fewer than 10 correspondences yields a
// failure result.
RegistrationResult register_clouds(const GaussianCloud& source,
                                   const GaussianCloud& target,
                                   const PoseSE3& initial,
                                   const RegistrationConfig& cfg);

}  // namespace gloam
