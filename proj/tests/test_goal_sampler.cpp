#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "locoman/goal_sampler.hpp"

using namespace locoman;

TEST_CASE("invariant frame ignores base height, roll and pitch") {
  const Eigen::Vector3d point(1.2, -0.4, 0.8);
  Pose base_a = Pose::from_euler({0.5, 0.2, 0.43}, {0.0, 0.0, 0.7});
  Pose base_b = Pose::from_euler({0.5, 0.2, 0.61}, {0.0, 0.0, 0.7});  // higher base
  CHECK((to_invariant(base_a, point) - to_invariant(base_b, point)).norm() < 1e-12);

  Pose base_c = Pose::from_euler({0.5, 0.2, 0.43}, {0.3, -0.25, 0.7});  // rolled, pitched
  CHECK((to_invariant(base_a, point) - to_invariant(base_c, point)).norm() < 1e-12);
}

TEST_CASE("invariant frame rotates outputs by minus the yaw change") {
  const Eigen::Vector3d point(0.9, 0.3, 0.5);
  const double alpha = 0.6;
  Pose base = Pose::from_euler({0.1, -0.2, 0.5}, {0.1, -0.05, 0.4});
  Pose base_rot = Pose::from_euler({0.1, -0.2, 0.5}, {0.1, -0.05, 0.4 + alpha});

  const Eigen::Vector3d a = to_invariant(base, point);
  const Eigen::Vector3d b = to_invariant(base_rot, point);
  // Oracle: rotate a by -alpha about z with an explicit rotation matrix.
  Eigen::Matrix3d R;
  R << std::cos(-alpha), -std::sin(-alpha), 0, std::sin(-alpha), std::cos(-alpha), 0, 0, 0, 1;
  CHECK((b - R * a).norm() < 1e-12);
}

TEST_CASE("invariant frame is equivariant under horizontal translation") {
  const Eigen::Vector3d point(0.9, 0.3, 0.5);
  const Eigen::Vector3d shift(0.7, -1.1, 0.0);
  Pose base = Pose::from_euler({0.1, -0.2, 0.5}, {0.0, 0.0, 0.3});
  Pose base_shifted = base;
  base_shifted.position += shift;
  CHECK((to_invariant(base, point) - to_invariant(base_shifted, point + shift)).norm() < 1e-12);
}

TEST_CASE("sample_goal ranges and uniformity") {
  Rng rng(42);
  const GoalRanges ranges;
  const int n = 100000;
  std::vector<double> ls, ps, ys;
  ls.reserve(n);
  for (int i = 0; i < n; ++i) {
    const SampledGoal g = sample_goal(rng, ranges);
    CHECK(g.spherical.l >= ranges.l_min);
    CHECK(g.spherical.l <= ranges.l_max);
    CHECK(g.spherical.p >= ranges.p_min);
    CHECK(g.spherical.p <= ranges.p_max);
    CHECK(g.spherical.y >= ranges.y_min);
    CHECK(g.spherical.y <= ranges.y_max);
    ls.push_back(g.spherical.l);
    ps.push_back(g.spherical.p);
    ys.push_back(g.spherical.y);
  }
  // Kolmogorov-Smirnov statistic against the uniform CDF.
  auto ks = [](std::vector<double>& v, double lo, double hi) {
    std::sort(v.begin(), v.end());
    double d = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      const double cdf = (v[i] - lo) / (hi - lo);
      const double lo_e = static_cast<double>(i) / v.size();
      const double hi_e = static_cast<double>(i + 1) / v.size();
      d = std::max({d, std::abs(cdf - lo_e), std::abs(cdf - hi_e)});
    }
    return d;
  };
  CHECK(ks(ls, ranges.l_min, ranges.l_max) < 0.01);
  CHECK(ks(ps, ranges.p_min, ranges.p_max) < 0.01);
  CHECK(ks(ys, ranges.y_min, ranges.y_max) < 0.01);
}

TEST_CASE("uniform quaternions: unit norm and isotropic second moment") {
  Rng rng(7);
  Eigen::Matrix4d outer = Eigen::Matrix4d::Zero();
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Eigen::Quaterniond q = uniform_quaternion(rng);
    CHECK(std::abs(q.norm() - 1.0) < 1e-12);
    const Eigen::Vector4d v(q.w(), q.x(), q.y(), q.z());
    outer += v * v.transpose();
  }
  outer /= n;
  CHECK((outer - 0.25 * Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("interpolate endpoints and midpoint") {
  GoalTrajectory traj;
  traj.start = {0.5, 0.0, 0.1};
  traj.end = {0.7, -0.2, 0.4};
  traj.duration = 2.0;
  CHECK((interpolate(traj, 0.0) - traj.start).norm() < 1e-15);
  CHECK((interpolate(traj, 2.0) - traj.end).norm() < 1e-15);
  CHECK((interpolate(traj, 1.0) - 0.5 * (traj.start + traj.end)).norm() < 1e-15);
  // Out-of-range times clamp.
  CHECK((interpolate(traj, -1.0) - traj.start).norm() < 1e-15);
  CHECK((interpolate(traj, 5.0) - traj.end).norm() < 1e-15);
  // The literal published formula runs end -> start.
  CHECK((interpolate(traj, 0.0, true) - traj.end).norm() < 1e-15);
  CHECK((interpolate(traj, 2.0, true) - traj.start).norm() < 1e-15);
}

TEST_CASE("resample keeps clear trajectories untouched") {
  BodyGeometry geom;
  GoalTrajectory traj;
  traj.start = {0.6, 0.0, 0.1};
  traj.end = {0.7, 0.1, 0.2};
  Rng rng(5);
  const ResampleResult r = resample_on_violation(traj, geom, rng);
  CHECK(r.draws == 0);
  CHECK((r.trajectory.end - traj.end).norm() == 0.0);
}

TEST_CASE("resample replaces a goal below ground") {
  BodyGeometry geom;
  GoalTrajectory traj;
  traj.start = {0.6, 0.0, 0.1};
  traj.end = {0.6, 0.0, -0.54};  // world height 0.01 < clearance 0.03
  Rng rng(5);
  const ResampleResult r = resample_on_violation(traj, geom, rng);
  CHECK(r.draws >= 1);
  CHECK_FALSE(trajectory_violates(r.trajectory, geom));
}

TEST_CASE("resample exhaustion on impossible geometry") {
  BodyGeometry geom;
  geom.capsule_radius = 10.0;  // swallow the whole workspace
  GoalTrajectory traj;
  traj.start = {0.6, 0.0, 0.1};
  traj.end = {0.0, 0.0, 0.0};
  Rng rng(5);
  CHECK_THROWS_AS(resample_on_violation(traj, geom, rng), SamplingExhaustedError);
}

TEST_CASE("resampled fraction matches a rejection-sampling oracle") {
  BodyGeometry geom;
  const GoalRanges ranges;
  const Eigen::Vector3d start(0.62, 0.05, 0.12);

  // Oracle: estimate the violation probability of a fresh draw by direct
  // Monte Carlo with an independent point-check implementation.
  auto oracle_violates = [&](const Eigen::Vector3d& end) {
    const int checks = 33;
    for (int i = 0; i < checks; ++i) {
      const double a = static_cast<double>(i) / (checks - 1);
      const Eigen::Vector3d p = (1.0 - a) * start + a * end;
      if (p.z() + geom.origin_height < geom.ground_clearance) return true;
      const Eigen::Vector3d ab = geom.capsule_b - geom.capsule_a;
      const double s = std::clamp((p - geom.capsule_a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      if ((p - (geom.capsule_a + s * ab)).norm() < geom.capsule_radius) return true;
    }
    return false;
  };

  Rng oracle_rng(99);
  int oracle_hits = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const SampledGoal g = sample_goal(oracle_rng, ranges);
    if (oracle_violates(g.position)) ++oracle_hits;
  }
  const double oracle_rate = static_cast<double>(oracle_hits) / n;

  Rng rng(123);
  int resampled = 0;
  for (int i = 0; i < n; ++i) {
    GoalTrajectory traj;
    traj.start = start;
    traj.end = sample_goal(rng, ranges).position;
    const ResampleResult r = resample_on_violation(traj, geom, rng, ranges);
    if (r.draws > 0) ++resampled;
  }
  const double measured_rate = static_cast<double>(resampled) / n;
  CHECK(std::abs(measured_rate - oracle_rate) < 0.02);
}

TEST_CASE("emitted goals stay inside the sampling shell") {
  Rng rng(21);
  const GoalRanges ranges;
  for (int i = 0; i < 5000; ++i) {
    const SampledGoal g = sample_goal(rng, ranges);
    const double r = g.position.norm();
    CHECK(r <= 0.95 + 1e-12);
    CHECK(r >= 0.4 - 1e-12);
  }
}
