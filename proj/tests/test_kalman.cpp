#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "mot3d/errors.hpp"
#include "mot3d/kalman.hpp"

namespace mot3d {
namespace {

using namespace state_index;
constexpr double kPi = std::numbers::pi;

double min_eigenvalue(const StateMatrix& m) {
  const Eigen::MatrixXd dense = m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  return es.eigenvalues().minCoeff();
}

TEST(KalmanInit, CopiesBoxWithZeroVelocity) {
  const KalmanFilter3D kf;
  const TrackState s = kf.init(Box3D{0, 0, 0, 0, 1, 1, 1});
  ASSERT_EQ(s.dims(), 10);
  StateVector expected(10);
  expected << 0, 0, 0, 0, 1, 1, 1, 0, 0, 0;
  EXPECT_EQ(s.mean, expected);
  for (int i = kVx; i <= kVz; ++i) EXPECT_EQ(s.covariance(i, i), kf.config().init_velocity_var);
  for (int i = 0; i < kObservedDims; ++i) EXPECT_EQ(s.covariance(i, i), kf.config().init_observed_var);

  const TrackState again = kf.init(Box3D{0, 0, 0, 0, 1, 1, 1});
  EXPECT_EQ(again.mean, s.mean);
  EXPECT_EQ(again.covariance, s.covariance);
}

TEST(KalmanPredict, ConstantVelocity) {
  const KalmanFilter3D kf;
  TrackState s = kf.init(Box3D{0, 0, 0, 0.3, 4, 2, 1.5});
  s.mean(kVx) = 1;
  s.mean(kVy) = 2;
  s.mean(kVz) = 3;
  const TrackState p = kf.predict(s);
  EXPECT_DOUBLE_EQ(p.mean(kX), 1.0);
  EXPECT_DOUBLE_EQ(p.mean(kY), 2.0);
  EXPECT_DOUBLE_EQ(p.mean(kZ), 3.0);
  EXPECT_DOUBLE_EQ(p.mean(kTheta), 0.3);
  EXPECT_DOUBLE_EQ(p.mean(kLength), 4.0);
  EXPECT_GT(p.covariance.trace(), s.covariance.trace());
}

TEST(KalmanPredict, ZeroVelocityIsFixedPoint) {
  const KalmanFilter3D kf;
  const TrackState s = kf.init(Box3D{3, -2, 1, -1.0, 4, 2, 1.5});
  EXPECT_EQ(kf.predict(s).mean, s.mean);
}

TEST(KalmanPredict, AngularVelocityFlag) {
  const KalmanFilter3D off;
  TrackState s = off.init(Box3D{0, 0, 0, 0.5, 1, 1, 1});
  for (int i = 0; i < 5; ++i) {
    s = off.predict(s);
    EXPECT_EQ(s.mean(kTheta), 0.5);
  }
  EXPECT_FALSE(s.has_angular_velocity());

  const KalmanFilter3D on(FilterConfig{.angular_velocity = true});
  TrackState w = on.init(Box3D{0, 0, 0, 3.0, 1, 1, 1});
  ASSERT_EQ(w.dims(), 11);
  EXPECT_EQ(w.mean(kVtheta), 0.0);
  w.mean(kVtheta) = 0.5;
  w = on.predict(w);
  EXPECT_NEAR(w.mean(kTheta), normalize_angle(3.5), 1e-12);  // wrapped
}

TEST(CorrectOrientation, Examples) {
  EXPECT_DOUBLE_EQ(correct_orientation(0.0, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(correct_orientation(0.0, kPi), kPi);
  const double r = correct_orientation(3 * kPi / 4, -kPi / 2);
  EXPECT_NEAR(r, -kPi / 4, 1e-12);
  // the wrapped gap is what matters, not the raw difference
  EXPECT_NEAR(correct_orientation(-3.0, 3.0), -3.0, 1e-12);
}

TEST(CorrectOrientation, IdempotentAndWithinQuarterTurn) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 10000; ++i) {
    const double t = u(rng), d = u(rng);
    const double once = correct_orientation(t, d);
    EXPECT_DOUBLE_EQ(correct_orientation(once, d), once);
    EXPECT_LE(std::abs(normalize_angle(d - once)), kPi / 2 + 1e-12);
  }
}

TEST(KalmanUpdate, TinyMeasurementNoiseFollowsDetection) {
  const KalmanFilter3D kf(FilterConfig{.measurement_var = 1e-10});
  const TrackState s = kf.predict(kf.init(Box3D{0, 0, 0, 0, 4, 2, 1.5}));
  const Box3D det{0.7, -0.4, 0.1, 0.2, 4.2, 1.9, 1.6};
  const Box3D post = kf.update(s, det).box();
  EXPECT_NEAR(post.cx, det.cx, 1e-6);
  EXPECT_NEAR(post.cy, det.cy, 1e-6);
  EXPECT_NEAR(post.cz, det.cz, 1e-6);
  EXPECT_NEAR(post.yaw, det.yaw, 1e-6);
  EXPECT_NEAR(post.length, det.length, 1e-6);
}

TEST(KalmanUpdate, ZeroInnovationContractsCovariance) {
  const KalmanFilter3D kf;
  const TrackState s = kf.predict(kf.init(Box3D{1, 2, 0.5, 0.1, 4, 2, 1.5}));
  const TrackState u = kf.update(s, s.box());
  for (int i = 0; i < s.dims(); ++i) EXPECT_NEAR(u.mean(i), s.mean(i), 1e-12);
  EXPECT_LT(u.covariance.trace(), s.covariance.trace());
}

TEST(KalmanUpdate, OrientationCorrectionAvoidsMidAngle) {
  // large theta uncertainty on the trajectory
  const FilterConfig base{.init_observed_var = 100.0};
  const Box3D det{0, 0, 0, kPi - 0.1, 4, 2, 1.5};

  const KalmanFilter3D with(base);
  const double corrected = with.update(with.init(Box3D{0, 0, 0, 0, 4, 2, 1.5}), det).mean(kTheta);
  EXPECT_LT(std::abs(normalize_angle(corrected - det.yaw)), 0.15);

  FilterConfig off = base;
  off.orientation_correction = false;
  const KalmanFilter3D without(off);
  const double naive = without.update(without.init(Box3D{0, 0, 0, 0, 4, 2, 1.5}), det).mean(kTheta);
  EXPECT_GT(naive, 0.0);
  EXPECT_LT(naive, kPi - 0.1);
}

TEST(KalmanUpdate, InnovationTakesTheShortWayAcrossPi) {
  const KalmanFilter3D kf;
  const TrackState s = kf.init(Box3D{0, 0, 0, -3.0, 4, 2, 1.5});
  const double post = kf.update(s, Box3D{0, 0, 0, 3.0, 4, 2, 1.5}).mean(kTheta);
  // prior and detection are 0.28 rad apart across the +-pi seam
  EXPECT_TRUE(post < -3.0 || post > 3.0) << post;
}

TEST(KalmanUpdate, SingularInnovationThrows) {
  const KalmanFilter3D kf(FilterConfig{.init_observed_var = 0.0, .measurement_var = 0.0});
  const TrackState s = kf.init(Box3D{0, 0, 0, 0, 1, 1, 1});
  EXPECT_THROW(kf.update(s, Box3D{0.1, 0, 0, 0, 1, 1, 1}), FilterError);
}

TEST(KalmanProperties, PosteriorStaysSymmetricPsdAndAnglesShrink) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (const bool angular : {false, true}) {
    const KalmanFilter3D kf(FilterConfig{.angular_velocity = angular});
    TrackState s = kf.init(Box3D{0, 0, 0, ang(rng), 4, 2, 1.5});
    for (int f = 0; f < 200; ++f) {
      s = kf.predict(s);
      const Box3D det{f * 0.5 + noise(rng), noise(rng), noise(rng), ang(rng), 4 + noise(rng), 2, 1.5};
      const double prior_gap = std::abs(normalize_angle(det.yaw - correct_orientation(s.mean(kTheta), det.yaw)));
      s = kf.update(s, det);
      EXPECT_GE(min_eigenvalue(s.covariance), -1e-9);
      EXPECT_LT((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff(), 1e-9);
      EXPECT_GT(s.mean(kTheta), -kPi);
      EXPECT_LE(s.mean(kTheta), kPi);
      EXPECT_LE(std::abs(normalize_angle(det.yaw - s.mean(kTheta))), prior_gap + 1e-12);
    }
  }
}

TEST(KalmanProperties, ConvergesOnNoiseFreeTrack) {
  const KalmanFilter3D kf;
  const double vx = 1.2, vy = -0.4;
  auto truth = [&](int f) { return Box3D{10 + vx * f, 5 + vy * f, 0.8, 0.3, 4, 2, 1.6}; };
  TrackState s = kf.init(truth(0));
  double err3 = 0.0, err20 = 0.0;
  for (int f = 1; f <= 20; ++f) {
    s = kf.predict(s);
    const Box3D t = truth(f);
    const double err = std::hypot(s.mean(kX) - t.cx, s.mean(kY) - t.cy);  // prediction error before update
    if (f == 3) err3 = err;
    if (f == 20) err20 = err;
    s = kf.update(s, t);
  }
  EXPECT_LT(err20, err3);
  EXPECT_NEAR(s.mean(kVx), vx, 0.05);
}

}  // namespace
}  // namespace mot3d
