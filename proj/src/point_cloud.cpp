// SPDX-License-Identifier: Apache-2.0
#include "gloam/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace gloam {

namespace {

void throw_io(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

}  // namespace

PointCloud read_kitti_bin(const std::string& path, const RangeGate& gate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io(path, "cannot open");
  in.seekg(0, std::ios::end);
  const std::int64_t bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes % 16 != 0) {
    throw_io(path, "truncated record at byte offset " +
                       std::to_string((bytes / 16) * 16));
  }
  const std::size_t n = static_cast<std::size_t>(bytes / 16);
  std::vector<float> raw(n * 4);
  if (n > 0) {
    in.read(reinterpret_cast<char*>(raw.data()), bytes);
    if (!in) throw_io(path, "read failed");
  }

  PointCloud cloud;
  cloud.positions.reserve(n);
  cloud.intensity.reserve(n);
  const double min_sq = gate.min_range * gate.min_range;
  const double max_sq = gate.max_range * gate.max_range;
  for (std::size_t i = 0; i < n; ++i) {
    const float* rec = raw.data() + i * 4;
    for (int j = 0; j < 4; ++j) {
      if (!std::isfinite(rec[j])) {
        throw_io(path, "non-finite value at byte offset " +
                           std::to_string(i * 16 + j * 4));
      }
    }
    const Eigen::Vector3d p(rec[0], rec[1], rec[2]);
    const double sq = p.squaredNorm();
    if (sq < min_sq || sq > max_sq) continue;
    cloud.positions.push_back(p);
    cloud.intensity.push_back(rec[3]);
  }
  return cloud;
}

void write_kitti_bin(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io(path, "cannot open for writing");
  std::vector<float> raw(cloud.size() * 4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    raw[i * 4 + 0] = static_cast<float>(cloud.positions[i].x());
    raw[i * 4 + 1] = static_cast<float>(cloud.positions[i].y());
    raw[i * 4 + 2] = static_cast<float>(cloud.positions[i].z());
    raw[i * 4 + 3] =
        cloud.has_intensity() ? static_cast<float>(cloud.intensity[i]) : 0.0f;
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!out) throw_io(path, "write failed");
}

PointCloud voxel_downsample(const PointCloud& cloud, double leaf,
                            std::size_t* dropped) {
  if (!(leaf > 0.0)) throw std::invalid_argument("voxel_downsample: leaf <= 0");
  constexpr std::int64_t kHalfSpan = std::int64_t{1} << 20;
  constexpr std::int64_t kSpan = std::int64_t{1} << 21;

  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    double intensity = 0.0;
    std::size_t count = 0;
  };
  std::unordered_map<std::uint64_t, Acc> voxels;
  voxels.reserve(cloud.size());
  std::size_t out_of_range = 0;

  const bool with_intensity = cloud.has_intensity();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.positions[i];
    std::uint64_t key = 0;
    bool ok = true;
    for (int a = 0; a < 3; ++a) {
      const std::int64_t cell =
          static_cast<std::int64_t>(std::floor(p[a] / leaf)) + kHalfSpan;
      if (cell < 0 || cell >= kSpan) {
        ok = false;
        break;
      }
      key |= static_cast<std::uint64_t>(cell) << (21 * a);
    }
    if (!ok) {
      ++out_of_range;
      continue;
    }
    Acc& acc = voxels[key];
    acc.sum += p;
    if (with_intensity) acc.intensity += cloud.intensity[i];
    ++acc.count;
  }

  std::vector<std::uint64_t> keys;
  keys.reserve(voxels.size());
  for (const auto& kv : voxels) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());

  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.positions.reserve(keys.size());
  if (with_intensity) out.intensity.reserve(keys.size());
  for (const std::uint64_t key : keys) {
    const Acc& acc = voxels.at(key);
    const double inv = 1.0 / static_cast<double>(acc.count);
    out.positions.push_back(acc.sum * inv);
    if (with_intensity) out.intensity.push_back(acc.intensity * inv);
  }
  if (dropped) *dropped = out_of_range;
  return out;
}

void export_ply(const PointCloud& cloud, const std::vector<SymMat3>* covariances,
                const std::string& path) {
  if (covariances && covariances->size() != cloud.size()) {
    throw std::invalid_argument("export_ply: covariance count mismatch");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_io(path, "cannot open for writing");
  const bool with_intensity = cloud.has_intensity();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_intensity) out << "property float intensity\n";
  if (covariances) {
    for (const char* name : {"c_xx", "c_xy", "c_xz", "c_yy", "c_yz", "c_zz"}) {
      out << "property float " << name << "\n";
    }
  }
  out << "end_header\n";

  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    emit(cloud.positions[i].x());
    out << ' ';
    emit(cloud.positions[i].y());
    out << ' ';
    emit(cloud.positions[i].z());
    if (with_intensity) {
      out << ' ';
      emit(cloud.intensity[i]);
    }
    if (covariances) {
      const SymMat3& c = (*covariances)[i];
      for (const double v : {c.xx, c.xy, c.xz, c.yy, c.yz, c.zz}) {
        out << ' ';
        emit(v);
      }
    }
    out << '\n';
  }
  if (!out) throw_io(path, "write failed");
}

void export_csv(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_io(path, "cannot open for writing");
  const bool with_intensity = cloud.has_intensity();
  out << (with_intensity ? "x,y,z,intensity\n" : "x,y,z\n");
  char buf[64];
  auto emit = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    emit(cloud.positions[i].x());
    out << ',';
    emit(cloud.positions[i].y());
    out << ',';
    emit(cloud.positions[i].z());
    if (with_intensity) {
      out << ',';
      emit(cloud.intensity[i]);
    }
    out << '\n';
  }
  if (!out) throw_io(path, "write failed");
}

}  // namespace gloam
