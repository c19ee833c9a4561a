// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>

namespace gloam {

enum class MlpRole { kConversion, kEigenvalue };

std::string to_string(MlpRole role);
MlpRole mlp_role_from_string(const std::string& s);

// Parameters of a 6-4-3 fully connected network with biases, stored flat:
// layer-1 weights row-major (24), layer-1 biases (4), layer-2 weights
// row-major (12), layer-2 biases (3).
struct MlpWeights {
  static constexpr int kInput = 6;
  static constexpr int kHidden = 4;
  static constexpr int kOutput = 3;
  static constexpr int kParamCount = 43;

  Eigen::Matrix<double, kParamCount, 1> params =
      Eigen::Matrix<double, kParamCount, 1>::Zero();
};

// The two trainable blocks: feature conversion and eigenvalue estimation.
struct MlpPair {
  MlpWeights conversion;
  MlpWeights eigenvalue;
};

// h = relu(W1 f + b1); y = W2 h + b2. The output layer is linear.
Eigen::Vector3d mlp_forward(const MlpWeights& w,
                            const Eigen::Matrix<double, 6, 1>& f);

// Text format: header line "gloam_mlp <role> 6 4 3", then one parameter
// per line at full precision.
void weights_serialize(const MlpWeights& w, MlpRole role,
                       const std::string& path);
struct LoadedWeights {
  MlpWeights weights;
  MlpRole role;
};
LoadedWeights weights_deserialize(const std::string& path);

// Uniform in [-1, 1], deterministic given the seed.
MlpWeights weights_random(std::uint64_t seed);

}  // namespace gloam
