#pragma once

#include <array>
#include <optional>
#include <string>

#include "mot3d/geometry.hpp"

namespace mot3d {

// KITTI columns that carry no 3D meaning but are written back unchanged.
struct KittiPassthrough {
  double truncated = 0.0;
  int occluded = 0;
  double alpha = -10.0;
  std::array<double, 4> bbox2d{-1.0, -1.0, -1.0, -1.0};

  friend bool operator==(const KittiPassthrough&, const KittiPassthrough&) = default;
};

// One row of detector output or annotation. track_id is -1 for raw detections.
struct Detection3D {
  int frame = 0;
  std::string class_label;
  Box3D box;
  double score = 1.0;
  int track_id = -1;
  std::optional<KittiPassthrough> passthrough;

  friend bool operator==(const Detection3D&, const Detection3D&) = default;
};

}  // namespace mot3d
