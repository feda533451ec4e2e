#include "mot3d/kalman.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "mot3d/errors.hpp"

namespace mot3d {

using namespace state_index;

Box3D TrackState::box() const {
  return Box3D{mean(kX),      mean(kY),     mean(kZ),      mean(kTheta),
               mean(kLength), mean(kWidth), mean(kHeight)};
}

double correct_orientation(double traj_theta, double det_theta) {
  const double diff = normalize_angle(det_theta - traj_theta);
  if (std::abs(diff) > std::numbers::pi / 2.0) return normalize_angle(traj_theta + std::numbers::pi);
  return normalize_angle(traj_theta);
}

KalmanFilter3D::KalmanFilter3D(FilterConfig config)
    : config_(config), dims_(config.angular_velocity ? kMaxStateDims : kMaxStateDims - 1) {
  transition_ = StateMatrix::Identity(dims_, dims_);
  transition_(kX, kVx) = 1.0;
  transition_(kY, kVy) = 1.0;
  transition_(kZ, kVz) = 1.0;
  if (config_.angular_velocity) transition_(kTheta, kVtheta) = 1.0;

  process_noise_ = StateMatrix::Zero(dims_, dims_);
  initial_covariance_ = StateMatrix::Zero(dims_, dims_);
  for (int i = 0; i < dims_; ++i) {
    const bool observed = i < kObservedDims;
    process_noise_(i, i) = observed ? config_.process_observed_var : config_.process_velocity_var;
    initial_covariance_(i, i) = observed ? config_.init_observed_var : config_.init_velocity_var;
  }
  measurement_noise_.setIdentity();
  measurement_noise_ *= config_.measurement_var;
}

TrackState KalmanFilter3D::init(const Box3D& box) const {
  TrackState s;
  s.mean = StateVector::Zero(dims_);
  s.mean(kX) = box.cx;
  s.mean(kY) = box.cy;
  s.mean(kZ) = box.cz;
  s.mean(kTheta) = normalize_angle(box.yaw);
  s.mean(kLength) = box.length;
  s.mean(kWidth) = box.width;
  s.mean(kHeight) = box.height;
  s.covariance = initial_covariance_;
  return s;
}

TrackState KalmanFilter3D::predict(const TrackState& state) const {
  TrackState out;
  out.mean = transition_ * state.mean;
  out.mean(kTheta) = normalize_angle(out.mean(kTheta));
  out.covariance = transition_ * state.covariance * transition_.transpose() + process_noise_;
  return out;
}

TrackState KalmanFilter3D::update(const TrackState& state, const Box3D& detection) const {
  using MeasVec = Eigen::Matrix<double, kObservedDims, 1>;
  using MeasMat = Eigen::Matrix<double, kObservedDims, kObservedDims>;

  StateVector x = state.mean;
  const StateMatrix& P = state.covariance;
  if (config_.orientation_correction) {
    x(kTheta) = correct_orientation(x(kTheta), detection.yaw);
  }

  const MeasVec z{detection.cx,     detection.cy,    detection.cz,    normalize_angle(detection.yaw),
                  detection.length, detection.width, detection.height};
  // H selects the leading observed block, so H*P*H^T and P*H^T are sub-blocks of P.
  MeasVec innovation = z - x.head<kObservedDims>();
  innovation(kTheta) = normalize_angle(innovation(kTheta));
  const MeasMat S = P.topLeftCorner<kObservedDims, kObservedDims>() + measurement_noise_;
  const Eigen::LLT<MeasMat> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite()) {
    throw FilterError("innovation covariance is not positive definite");
  }
  // K = P H^T S^-1
  const Eigen::Matrix<double, Eigen::Dynamic, kObservedDims, 0, kMaxStateDims, kObservedDims> PHt =
      P.leftCols<kObservedDims>();
  const Eigen::Matrix<double, Eigen::Dynamic, kObservedDims, 0, kMaxStateDims, kObservedDims> K =
      llt.solve(PHt.transpose()).transpose();

  TrackState out;
  out.mean = x + K * innovation;
  out.mean(kTheta) = normalize_angle(out.mean(kTheta));

  // Joseph form keeps the posterior symmetric PSD.
  StateMatrix IKH = StateMatrix::Identity(dims_, dims_);
  IKH.leftCols<kObservedDims>() -= K;
  StateMatrix post = IKH * P * IKH.transpose() + K * measurement_noise_ * K.transpose();
  out.covariance = 0.5 * (post + post.transpose());
  return out;
}

}  // namespace mot3d
