// SPDX-License-Identifier: Apache-2.0
#include "gloam/mlp.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gloam/rng.hpp"

namespace gloam {

std::string to_string(MlpRole role) {
  return role == MlpRole::kConversion ? "conversion" : "eigenvalue";
}

MlpRole mlp_role_from_string(const std::string& s) {
  if (s == "conversion") return MlpRole::kConversion;
  if (s == "eigenvalue") return MlpRole::kEigenvalue;
  throw std::invalid_argument("unknown mlp role: " + s);
}

Eigen::Vector3d mlp_forward(const MlpWeights& w,
                            const Eigen::Matrix<double, 6, 1>& f) {
  constexpr int kIn = MlpWeights::kInput;
  constexpr int kHid = MlpWeights::kHidden;
  constexpr int kOut = MlpWeights::kOutput;
  const auto& p = w.params;

  Eigen::Matrix<double, kHid, 1> h;
  for (int i = 0; i < kHid; ++i) {
    double acc = p[kIn * kHid + i];  // bias
    for (int j = 0; j < kIn; ++j) acc += p[i * kIn + j] * f[j];
    h[i] = acc > 0.0 ? acc : 0.0;
  }

  constexpr int kL2 = kIn * kHid + kHid;
  Eigen::Vector3d y;
  for (int i = 0; i < kOut; ++i) {
    double acc = p[kL2 + kHid * kOut + i];  // bias
    for (int j = 0; j < kHid; ++j) acc += p[kL2 + i * kHid + j] * h[j];
    y[i] = acc;
  }
  return y;
}

void weights_serialize(const MlpWeights& w, MlpRole role,
                       const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "gloam_mlp " << to_string(role) << " " << MlpWeights::kInput << " "
      << MlpWeights::kHidden << " " << MlpWeights::kOutput << "\n";
  char buf[64];
  for (int i = 0; i < MlpWeights::kParamCount; ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", w.params[i]);
    out << buf << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

LoadedWeights weights_deserialize(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error(path + ": missing header");
  }
  std::istringstream hs(header);
  std::string magic, role_name;
  int in_n = 0, hid_n = 0, out_n = 0;
  if (!(hs >> magic >> role_name >> in_n >> hid_n >> out_n) ||
      magic != "gloam_mlp") {
    throw std::runtime_error(path + ": malformed header");
  }
  if (in_n != MlpWeights::kInput || hid_n != MlpWeights::kHidden ||
      out_n != MlpWeights::kOutput) {
    throw std::runtime_error(path + ": unsupported layer shape");
  }

  LoadedWeights loaded;
  try {
    loaded.role = mlp_role_from_string(role_name);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  int count = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (count >= MlpWeights::kParamCount) {
      throw std::runtime_error(path + ": too many parameters");
    }
    std::size_t pos = 0;
    double value = 0.0;
    try {
      value = std::stod(line, &pos);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": bad parameter on line " +
                               std::to_string(count + 2));
    }
    if (!std::isfinite(value)) {
      throw std::runtime_error(path + ": non-finite parameter on line " +
                               std::to_string(count + 2));
    }
    loaded.weights.params[count++] = value;
  }
  if (count != MlpWeights::kParamCount) {
    throw std::runtime_error(path + ": expected " +
                             std::to_string(MlpWeights::kParamCount) +
                             " parameters, found " + std::to_string(count));
  }
  return loaded;
}

MlpWeights weights_random(std::uint64_t seed) {
  Rng rng(seed);
  MlpWeights w;
  for (int i = 0; i < MlpWeights::kParamCount; ++i) {
    w.params[i] = rng.uniform(-1.0, 1.0);
  }
  return w;
}

}  // namespace gloam
