#pragma once

#include <Eigen/Core>

#include "mot3d/geometry.hpp"

namespace mot3d {

// State layout: x y z theta l w h vx vy vz [vtheta]. Velocities are per frame.
namespace state_index {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kZ = 2;
inline constexpr int kTheta = 3;
inline constexpr int kLength = 4;
inline constexpr int kWidth = 5;
inline constexpr int kHeight = 6;
inline constexpr int kVx = 7;
inline constexpr int kVy = 8;
inline constexpr int kVz = 9;
inline constexpr int kVtheta = 10;
}  // namespace state_index

inline constexpr int kObservedDims = 7;
inline constexpr int kMaxStateDims = 11;

using StateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDims, 1>;
using StateMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStateDims, kMaxStateDims>;

struct TrackState {
  StateVector mean;
  StateMatrix covariance;

  int dims() const { return static_cast<int>(mean.size()); }
  bool has_angular_velocity() const { return dims() == kMaxStateDims; }
  Box3D box() const;
};

// Diagonal covariance settings. Units are m^2 / rad^2 (per frame for the velocity block).
struct FilterConfig {
  bool angular_velocity = false;
  bool orientation_correction = true;
  double init_observed_var = 10.0;
  double init_velocity_var = 1000.0;
  double process_observed_var = 0.0;
  double process_velocity_var = 1.0;
  double measurement_var = 1.0;
};

// Returns traj_theta, or traj_theta + pi when the detection points the other way
// (|normalize(det - traj)| > pi/2). The result is normalized.
double correct_orientation(double traj_theta, double det_theta);

// Constant-velocity filter over an upright 3D box. Operations are const; the filter only
// holds the model matrices.
class KalmanFilter3D {
 public:
  explicit KalmanFilter3D(FilterConfig config = {});

  const FilterConfig& config() const { return config_; }
  int dims() const { return dims_; }

  TrackState init(const Box3D& box) const;
  TrackState predict(const TrackState& state) const;
  // Throws FilterError if the innovation covariance is not positive definite.
  TrackState update(const TrackState& state, const Box3D& detection) const;

 private:
  FilterConfig config_;
  int dims_;
  StateMatrix transition_;
  StateMatrix process_noise_;
  StateMatrix initial_covariance_;
  Eigen::Matrix<double, kObservedDims, kObservedDims> measurement_noise_;
};

}  // namespace mot3d
