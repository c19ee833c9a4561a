// SPDX-License-Identifier: Apache-2.0
#include "gloam/registration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "gloam/parallel.hpp"

namespace gloam {

namespace {

constexpr int kMinCorrespondences = 10;
// Largest neighborhood eigenvalue below which the points are treated as
// coincident.
constexpr double kDegenerateEigenvalue = 1e-24;

const KdTree<3>* tree3(const GaussianCloud& c) {
  return c.association_tree ? std::get_if<KdTree<3>>(c.association_tree.get())
                            : nullptr;
}

const KdTree<6>* tree6(const GaussianCloud& c) {
  return c.association_tree ? std::get_if<KdTree<6>>(c.association_tree.get())
                            : nullptr;
}

}  // namespace

std::string to_string(AssociationMode mode) {
  return mode == AssociationMode::kEuclidean ? "euclidean" : "feature";
}

std::string to_string(CovarianceMode mode) {
  return mode == CovarianceMode::kPlane ? "plane" : "learned";
}

AssociationMode association_mode_from_string(const std::string& s) {
  if (s == "euclidean") return AssociationMode::kEuclidean;
  if (s == "feature" || s == "feature_extended") {
    return AssociationMode::kFeatureExtended;
  }
  throw std::invalid_argument("unknown association mode: " + s);
}

CovarianceMode covariance_mode_from_string(const std::string& s) {
  if (s == "plane") return CovarianceMode::kPlane;
  if (s == "learned") return CovarianceMode::kLearned;
  throw std::invalid_argument("unknown covariance mode: " + s);
}

CovarianceBasis covariance_basis(const PointCloud& cloud, const KdTree<3>& tree,
                                 int k) {
  if (cloud.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("covariance_basis: cloud smaller than k");
  }
  CovarianceBasis basis;
  basis.decomps.resize(cloud.size());
  basis.degenerate.assign(cloud.size(), 0);

  std::atomic<int> degenerate_count{0};
  parallel_for(cloud.size(), [&](std::size_t i) {
    thread_local std::vector<Neighbor> nn;
    tree.knn(cloud.positions[i], k, nn);

    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d sq = Eigen::Matrix3d::Zero();
    for (const Neighbor& n : nn) {
      const Eigen::Vector3d& p = cloud.positions[static_cast<std::size_t>(n.index)];
      sum += p;
      sq += p * p.transpose();
    }
    const double inv_k = 1.0 / static_cast<double>(nn.size());
    const Eigen::Vector3d mean = sum * inv_k;
    const Eigen::Matrix3d cov = sq * inv_k - mean * mean.transpose();

    basis.decomps[i] = eig_sym3(SymMat3::from_matrix(cov));
    if (basis.decomps[i].eigenvalues.maxCoeff() <= kDegenerateEigenvalue) {
      basis.degenerate[i] = 1;
      degenerate_count.fetch_add(1, std::memory_order_relaxed);
    }
  });
  basis.degenerate_count = degenerate_count.load();
  return basis;
}

std::vector<SymMat3> plane_covariances(const CovarianceBasis& basis,
                                       double epsilon) {
  std::vector<SymMat3> out(basis.decomps.size());
  const Eigen::Vector3d plane_values(epsilon, 1.0, 1.0);
  parallel_for(basis.decomps.size(), [&](std::size_t i) {
    if (basis.degenerate[i]) {
      out[i] = SymMat3::from_matrix(epsilon * Eigen::Matrix3d::Identity());
      return;
    }
    const Eigen::Matrix3d& q = basis.decomps[i].eigenvectors;
    out[i] = SymMat3::from_matrix(q * plane_values.asDiagonal() * q.transpose());
  });
  return out;
}

std::vector<SymMat3> learned_covariances(const CovarianceBasis& basis,
                                         const FeatureSet& features,
                                         const MlpWeights& weights,
                                         double epsilon) {
  if (static_cast<std::size_t>(features.rows()) != basis.decomps.size()) {
    throw std::invalid_argument("learned_covariances: feature row mismatch");
  }
  std::vector<SymMat3> out(basis.decomps.size());
  parallel_for(basis.decomps.size(), [&](std::size_t i) {
    if (basis.degenerate[i]) {
      out[i] = SymMat3::from_matrix(epsilon * Eigen::Matrix3d::Identity());
      return;
    }
    Eigen::Vector3d e = mlp_forward(
        weights, features.values.row(static_cast<Eigen::Index>(i)).transpose());
    std::sort(e.data(), e.data() + 3);
    for (int j = 0; j < 3; ++j) {
      if (e[j] <= epsilon) e[j] = epsilon;
    }
    e /= e.norm();
    const Eigen::Matrix3d& q = basis.decomps[i].eigenvectors;
    out[i] = SymMat3::from_matrix(q * e.asDiagonal() * q.transpose());
  });
  return out;
}

GaussianCloud estimate_covariances_plane(const PointCloud& cloud, int k,
                                         double epsilon) {
  GaussianCloud out;
  out.cloud = cloud;
  KdTree<3> tree(cloud.positions);
  const CovarianceBasis basis = covariance_basis(cloud, tree, k);
  out.covariances = plane_covariances(basis, epsilon);
  out.degenerate_count = basis.degenerate_count;
  return out;
}

GaussianCloud estimate_covariances_learned(const PointCloud& cloud,
                                           const FeatureSet& features,
                                           const MlpWeights& weights, int k,
                                           double epsilon) {
  GaussianCloud out;
  out.cloud = cloud;
  KdTree<3> tree(cloud.positions);
  const CovarianceBasis basis = covariance_basis(cloud, tree, k);
  out.covariances = learned_covariances(basis, features, weights, epsilon);
  out.degenerate_count = basis.degenerate_count;
  return out;
}

void set_association_vectors(GaussianCloud& cloud, AssociationMode mode,
                             const FeatureSet* features,
                             const MlpWeights* conversion) {
  const std::size_t n = cloud.size();
  if (n == 0) throw std::invalid_argument("set_association_vectors: empty cloud");

  if (mode == AssociationMode::kEuclidean) {
    cloud.association_vectors.resize(static_cast<Eigen::Index>(n), 3);
    std::vector<Eigen::Matrix<double, 3, 1>> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      cloud.association_vectors.row(static_cast<Eigen::Index>(i)) =
          cloud.cloud.positions[i].transpose();
      pts[i] = cloud.cloud.positions[i];
    }
    cloud.association_tree =
        std::make_shared<AssociationTree>(KdTree<3>(std::move(pts)));
    return;
  }

  if (!features || !conversion) {
    throw std::invalid_argument(
        "set_association_vectors: feature mode needs features and conversion "
        "weights");
  }
  if (static_cast<std::size_t>(features->rows()) != n) {
    throw std::invalid_argument("set_association_vectors: feature row mismatch");
  }
  cloud.association_vectors.resize(static_cast<Eigen::Index>(n), 6);
  std::vector<Eigen::Matrix<double, 6, 1>> pts(n);
  parallel_for(n, [&](std::size_t i) {
    const Eigen::Index row = static_cast<Eigen::Index>(i);
    const Eigen::Vector3d converted =
        mlp_forward(*conversion, features->values.row(row).transpose());
    Eigen::Matrix<double, 6, 1> v;
    v.head<3>() = cloud.cloud.positions[i];
    v.tail<3>() = converted;
    cloud.association_vectors.row(row) = v.transpose();
    pts[i] = v;
  });
  cloud.association_tree =
      std::make_shared<AssociationTree>(KdTree<6>(std::move(pts)));
}

Correspondences associate(const GaussianCloud& source,
                          const GaussianCloud& target, const PoseSE3& pose,
                          const RegistrationConfig& cfg) {
  const std::size_t n = source.size();
  const double gate =
      cfg.max_correspondence_distance * cfg.max_correspondence_distance;
  std::vector<Neighbor> hits(n, Neighbor{-1, 0.0});

  if (cfg.association == AssociationMode::kEuclidean) {
    const KdTree<3>* tree = tree3(target);
    if (!tree) {
      throw std::invalid_argument(
          "associate: target lacks a 3-D association tree");
    }
    parallel_for(n, [&](std::size_t i) {
      const Eigen::Vector3d q = transform_point(pose, source.cloud.positions[i]);
      hits[i] = tree->nearest(q);
    });
  } else {
    const KdTree<6>* tree = tree6(target);
    if (!tree) {
      throw std::invalid_argument(
          "associate: target lacks a 6-D association tree");
    }
    if (source.association_vectors.cols() != 6 ||
        source.association_vectors.rows() != static_cast<Eigen::Index>(n)) {
      throw std::invalid_argument(
          "associate: source lacks 6-D association vectors");
    }
    parallel_for(n, [&](std::size_t i) {
      const Eigen::Index row = static_cast<Eigen::Index>(i);
      Eigen::Matrix<double, 6, 1> q;
      q.head<3>() = transform_point(pose, source.cloud.positions[i]);
      q.tail<3>() = source.association_vectors.row(row).tail<3>().transpose();
      hits[i] = tree->nearest(q);
    });
  }

  Correspondences corr;
  corr.pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (hits[i].index < 0 || hits[i].sq_dist > gate) continue;
    corr.pairs.push_back(
        Correspondence{static_cast<int>(i), hits[i].index, hits[i].sq_dist});
  }
  return corr;
}

namespace {

struct PairTerm {
  double cost = 0.0;
  Eigen::Matrix<double, 6, 1> gradient = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 6> hessian = Eigen::Matrix<double, 6, 6>::Zero();
  bool valid = false;
};

// Computes the Mahalanobis term (and optionally derivatives) of one pair.
bool pair_term(const GaussianCloud& source, const GaussianCloud& target,
               const Correspondence& c, const PoseSE3& pose,
               bool with_derivatives, PairTerm& out) {
  const Eigen::Vector3d y =
      transform_point(pose, source.cloud.positions[static_cast<std::size_t>(c.source)]);
  const Eigen::Vector3d d =
      target.cloud.positions[static_cast<std::size_t>(c.target)] - y;
  const Eigen::Matrix3d ca =
      source.covariances[static_cast<std::size_t>(c.source)].matrix();
  const Eigen::Matrix3d cb =
      target.covariances[static_cast<std::size_t>(c.target)].matrix();
  const Eigen::Matrix3d m =
      cb + pose.rotation * ca * pose.rotation.transpose();

  const double det = m.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
  const Eigen::Matrix3d m_inv = m.inverse();

  const Eigen::Vector3d md = m_inv * d;
  out.cost = d.dot(md);
  out.valid = true;
  if (!with_derivatives) return true;

  // d(xi) = b - exp(xi) * y;  J = dd/dxi at 0 = [skew(y), -I].
  Eigen::Matrix<double, 3, 6> jac;
  jac.leftCols<3>() = skew(y);
  jac.rightCols<3>() = -Eigen::Matrix3d::Identity();

  const Eigen::Matrix<double, 6, 3> jt_minv = jac.transpose() * m_inv;
  out.gradient = 2.0 * (jac.transpose() * md);
  out.hessian = 2.0 * (jt_minv * jac);
  return true;
}

std::vector<PairTerm> all_pair_terms(const GaussianCloud& source,
                                     const GaussianCloud& target,
                                     const Correspondences& corr,
                                     const PoseSE3& pose,
                                     bool with_derivatives) {
  std::vector<PairTerm> terms(corr.size());
  parallel_for(corr.size(), [&](std::size_t i) {
    pair_term(source, target, corr.pairs[i], pose, with_derivatives, terms[i]);
  });
  return terms;
}

}  // namespace

CostTerms gicp_cost_and_gradient(const GaussianCloud& source,
                                 const GaussianCloud& target,
                                 const Correspondences& corr,
                                 const PoseSE3& pose) {
  if (corr.empty()) {
    throw std::invalid_argument("gicp_cost_and_gradient: no correspondences");
  }
  const std::vector<PairTerm> terms =
      all_pair_terms(source, target, corr, pose, true);

  CostTerms out;
  out.cost = tree_reduce<double>(
      terms.size(), [&](std::size_t i) { return terms[i].valid ? terms[i].cost : 0.0; },
      0.0);
  out.gradient = tree_reduce<Eigen::Matrix<double, 6, 1>>(
      terms.size(),
      [&](std::size_t i) {
        return terms[i].valid ? terms[i].gradient
                              : Eigen::Matrix<double, 6, 1>::Zero().eval();
      },
      Eigen::Matrix<double, 6, 1>::Zero());
  out.hessian = tree_reduce<Eigen::Matrix<double, 6, 6>>(
      terms.size(),
      [&](std::size_t i) {
        return terms[i].valid ? terms[i].hessian
                              : Eigen::Matrix<double, 6, 6>::Zero().eval();
      },
      Eigen::Matrix<double, 6, 6>::Zero());
  for (const PairTerm& t : terms) {
    if (!t.valid) ++out.dropped;
  }
  return out;
}

double gicp_cost(const GaussianCloud& source, const GaussianCloud& target,
                 const Correspondences& corr, const PoseSE3& pose,
                 int* dropped) {
  const std::vector<PairTerm> terms =
      all_pair_terms(source, target, corr, pose, false);
  if (dropped) {
    *dropped = 0;
    for (const PairTerm& t : terms) {
      if (!t.valid) ++*dropped;
    }
  }
  return tree_reduce<double>(
      terms.size(), [&](std::size_t i) { return terms[i].valid ? terms[i].cost : 0.0; },
      0.0);
}

std::vector<double> gicp_pair_costs(const GaussianCloud& source,
                                    const GaussianCloud& target,
                                    const Correspondences& corr,
                                    const PoseSE3& pose) {
  const std::vector<PairTerm> terms =
      all_pair_terms(source, target, corr, pose, false);
  std::vector<double> out(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    out[i] = terms[i].valid ? terms[i].cost : 0.0;
  }
  return out;
}

RegistrationResult register_clouds(const GaussianCloud& source,
                                   const GaussianCloud& target,
                                   const PoseSE3& initial,
                                   const RegistrationConfig& cfg) {
  if (source.size() == 0 || target.size() == 0) {
    throw std::invalid_argument("register_clouds: empty cloud");
  }
  if (source.covariances.size() != source.size() ||
      target.covariances.size() != target.size()) {
    throw std::invalid_argument("register_clouds: missing covariances");
  }

  RegistrationResult result;
  result.pose = initial;
  // Left-multiplying by exp(step) preserves any off-SO(3) defect in the
  // initial guess, and odometry feeds results back into the next prior, so
  // an unprojected seed compounds geometrically across frames.
  result.pose.rotation = orthonormalized(result.pose.rotation);
  double lambda = cfg.lm_initial_lambda;
  Correspondences corr;

  for (int outer = 0; outer < cfg.max_outer_iterations; ++outer) {
    result.iterations = outer + 1;
    corr = associate(source, target, result.pose, cfg);
    result.inlier_count = static_cast<int>(corr.size());
    if (static_cast<int>(corr.size()) < kMinCorrespondences) {
      result.converged = false;
      result.message = "too few correspondences (" +
                       std::to_string(corr.size()) + " < " +
                       std::to_string(kMinCorrespondences) + ")";
      result.final_cost =
          corr.empty() ? 0.0 : gicp_cost(source, target, corr, result.pose);
      return result;
    }

    const CostTerms terms =
        gicp_cost_and_gradient(source, target, corr, result.pose);
    double current_cost = terms.cost;

    bool accepted = false;
    double accepted_norm = 0.0;
    bool tiny_step = false;
    for (int inner = 0; inner < cfg.lm_max_inner_iterations; ++inner) {
      Eigen::Matrix<double, 6, 6> damped = terms.hessian;
      damped.diagonal().array() += lambda;
      const Eigen::Matrix<double, 6, 1> step =
          damped.ldlt().solve(-terms.gradient);
      if (!step.allFinite()) {
        lambda *= cfg.lm_lambda_scale;
        continue;
      }
      if (step.norm() < cfg.convergence_tolerance) {
        tiny_step = true;
        break;
      }
      const PoseSE3 candidate =
          compose(se3_exp(Twist::from_vector(step)), result.pose);
      const double candidate_cost = gicp_cost(source, target, corr, candidate);
      if (candidate_cost < current_cost) {
        result.pose = candidate;
        current_cost = candidate_cost;
        lambda /= cfg.lm_lambda_scale;
        accepted = true;
        accepted_norm = step.norm();
        break;
      }
      lambda *= cfg.lm_lambda_scale;
    }

    result.final_cost = current_cost;
    if (tiny_step || !accepted || accepted_norm < cfg.convergence_tolerance) {
      result.converged = true;
      result.message = accepted || tiny_step
                           ? "converged"
                           : "no acceptable step (local minimum)";
      return result;
    }
  }

  result.converged = false;
  result.message = "max outer iterations reached";
  return result;
}

}  // namespace gloam
