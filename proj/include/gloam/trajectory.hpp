// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "gloam/geometry.hpp"

namespace gloam {

// World-frame poses, one per frame, in the frame of the first pose.
// Frame indices are strictly increasing.
struct Trajectory {
  std::vector<int> frame_ids;
  std::vector<PoseSE3> poses;

  std::size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }

  void push_back(int frame_id, const PoseSE3& pose) {
    frame_ids.push_back(frame_id);
    poses.push_back(pose);
  }
};

}  // namespace gloam
