#include "locoman/goal_sampler.hpp"

#include <cmath>

namespace locoman {

InvariantFrame InvariantFrame::from_base(const Pose& base_pose, double origin_height) {
  InvariantFrame f;
  f.origin = {base_pose.position.x(), base_pose.position.y(), origin_height};
  f.yaw = base_pose.euler().z();
  return f;
}

Eigen::Vector3d InvariantFrame::to_frame(const Eigen::Vector3d& world_point) const {
  const Eigen::Vector3d d = world_point - origin;
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

Eigen::Vector3d InvariantFrame::to_world(const Eigen::Vector3d& frame_point) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return origin + Eigen::Vector3d(c * frame_point.x() - s * frame_point.y(),
                                  s * frame_point.x() + c * frame_point.y(), frame_point.z());
}

Eigen::Vector3d to_invariant(const Pose& base_pose, const Eigen::Vector3d& world_point,
                             double origin_height) {
  return InvariantFrame::from_base(base_pose, origin_height).to_frame(world_point);
}

Eigen::Quaterniond uniform_quaternion(Rng& rng) {
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Eigen::Quaterniond(a * std::sin(2.0 * M_PI * u2), a * std::cos(2.0 * M_PI * u2),
                            b * std::sin(2.0 * M_PI * u3), b * std::cos(2.0 * M_PI * u3));
}

SampledGoal sample_goal(Rng& rng, const GoalRanges& ranges) {
  SampledGoal g;
  g.spherical.l = rng.uniform(ranges.l_min, ranges.l_max);
  g.spherical.p = rng.uniform(ranges.p_min, ranges.p_max);
  g.spherical.y = rng.uniform(ranges.y_min, ranges.y_max);
  g.position = spherical_to_cartesian(g.spherical.l, g.spherical.p, g.spherical.y);
  g.orientation = uniform_quaternion(rng);
  return g;
}

Eigen::Vector3d interpolate(const GoalTrajectory& traj, double t, bool literal_formula) {
  const double tc = std::clamp(t, 0.0, traj.duration);
  const double alpha = traj.duration > 0.0 ? tc / traj.duration : 1.0;
  if (literal_formula) return alpha * traj.start + (1.0 - alpha) * traj.end;
  return (1.0 - alpha) * traj.start + alpha * traj.end;
}

namespace {

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

bool point_violates(const Eigen::Vector3d& p, const BodyGeometry& g) {
  if (p.z() + g.origin_height < g.ground_clearance) return true;
  return point_segment_distance(p, g.capsule_a, g.capsule_b) < g.capsule_radius;
}

}  // namespace

bool trajectory_violates(const GoalTrajectory& traj, const BodyGeometry& geometry, int checks) {
  for (int i = 0; i < checks; ++i) {
    const double t = traj.duration * static_cast<double>(i) / static_cast<double>(checks - 1);
    if (point_violates(interpolate(traj, t), geometry)) return true;
  }
  return false;
}

ResampleResult resample_on_violation(const GoalTrajectory& traj, const BodyGeometry& geometry,
                                     Rng& rng, const GoalRanges& ranges, int max_draws) {
  ResampleResult result;
  result.trajectory = traj;
  if (!trajectory_violates(traj, geometry)) return result;

  for (int draw = 1; draw <= max_draws; ++draw) {
    const SampledGoal g = sample_goal(rng, ranges);
    GoalTrajectory candidate = traj;
    candidate.end = g.position;
    candidate.orientation = g.orientation;
    if (!trajectory_violates(candidate, geometry)) {
      result.trajectory = candidate;
      result.draws = draw;
      return result;
    }
  }
  throw SamplingExhaustedError(
      "resample_on_violation: no clear goal after " + std::to_string(max_draws) +
      " draws; body geometry is likely misconfigured");
}

}  // namespace locoman
