#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "locoman/kinematics.hpp"
#include "locoman/rng.hpp"

namespace locoman {

/// Goal frame that ignores base height, roll and pitch: origin on the
/// vertical line through the arm base at a fixed height, axes rotated by the
/// base yaw only.
struct InvariantFrame {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();  // world, z = fixed height
  double yaw = 0.0;

  static InvariantFrame from_base(const Pose& base_pose, double origin_height = 0.55);

  Eigen::Vector3d to_frame(const Eigen::Vector3d& world_point) const;
  Eigen::Vector3d to_world(const Eigen::Vector3d& frame_point) const;
};

/// Point expressed in the invariant frame derived from base_pose.
Eigen::Vector3d to_invariant(const Pose& base_pose, const Eigen::Vector3d& world_point,
                             double origin_height = 0.55);

/// End-effector goal sampling ranges (spherical coordinates around the
/// invariant origin).
struct GoalRanges {
  double l_min = 0.4, l_max = 0.95;
  double p_min = -M_PI / 2.5, p_max = M_PI / 3.0;
  double y_min = -1.2, y_max = 1.2;
};

struct SampledGoal {
  Spherical spherical;
  Eigen::Vector3d position;        // invariant-frame cartesian
  Eigen::Quaterniond orientation;  // uniform over rotations
};

/// Uniform draw over the spherical ranges plus a uniform random orientation.
SampledGoal sample_goal(Rng& rng, const GoalRanges& ranges = {});

/// Uniform unit quaternion (Shoemake construction).
Eigen::Quaterniond uniform_quaternion(Rng& rng);

/// Linear goal trajectory from the current end-effector position to a
/// sampled end position over duration seconds.
struct GoalTrajectory {
  Eigen::Vector3d start = Eigen::Vector3d::Zero();  // current position p
  Eigen::Vector3d end = Eigen::Vector3d::Zero();    // sampled p_end
  double duration = 2.0;                            // seconds
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Interpolated command at time t, clamped to [0, duration]. The default
/// blends start -> end; literal_formula reproduces the reversed direction.
Eigen::Vector3d interpolate(const GoalTrajectory& traj, double t, bool literal_formula = false);

/// Torso keep-out capsule and ground clearance used when vetting sampled
/// trajectories, expressed in the invariant frame.
struct BodyGeometry {
  Eigen::Vector3d capsule_a = {-0.30, 0.0, -0.04};
  Eigen::Vector3d capsule_b = {0.30, 0.0, -0.04};
  double capsule_radius = 0.25;
  double ground_clearance = 0.03;  // minimum world height, meters
  double origin_height = 0.55;     // invariant-origin height above ground
};

bool trajectory_violates(const GoalTrajectory& traj, const BodyGeometry& geometry,
                         int checks = 33);

struct SamplingExhaustedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ResampleResult {
  GoalTrajectory trajectory;
  int draws = 0;  // end goals drawn, 0 when the input was kept
};

/// Redraw the end goal until the interpolated path stays clear of the body
/// capsule and the ground. Throws SamplingExhaustedError after 100 draws.
ResampleResult resample_on_violation(const GoalTrajectory& traj, const BodyGeometry& geometry,
                                     Rng& rng, const GoalRanges& ranges = {},
                                     int max_draws = 100);

}  // namespace locoman
