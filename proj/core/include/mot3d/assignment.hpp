#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mot3d/geometry.hpp"

namespace mot3d {

enum class AffinityMode { IoU, NegDistance };

// rows = predicted trajectories, cols = detections.
// IoU mode holds 3D IoU in [0, 1]; NegDistance mode holds -center_distance in meters.
struct AffinityMatrix {
  Eigen::MatrixXd values;
  AffinityMode mode = AffinityMode::IoU;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

using IndexPair = std::pair<std::size_t, std::size_t>;

struct AssociationResult {
  std::vector<IndexPair> matches;  // (trajectory, detection), ascending trajectory index
  std::vector<std::size_t> unmatched_trajectories;
  std::vector<std::size_t> unmatched_detections;
};

AffinityMatrix build_affinity(std::span<const Box3D> trajectories, std::span<const Box3D> detections,
                              AffinityMode mode, DistanceMode distance_mode = DistanceMode::Ground);

// Minimum-cost assignment of min(rows, cols) pairs, returned in ascending row order.
//
// Among equal-cost optima the lexicographically smallest one is returned: row 0 takes the
// lowest column it can while staying optimal, then row 1, and so on. Rectangular input is
// padded to square with a cost above every real entry. Throws InvalidArgument on NaN/inf.
std::vector<IndexPair> hungarian(const Eigen::MatrixXd& cost);

double assignment_cost(const Eigen::MatrixXd& cost, std::span<const IndexPair> pairs);

// Hungarian on -affinity, then pairs failing the gate are split back into unmatched on both
// sides. The gate is a minimum IoU in IoU mode and a maximum distance in NegDistance mode.
AssociationResult associate(const AffinityMatrix& affinity, double gate);

}  // namespace mot3d
