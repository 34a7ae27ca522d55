#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>

#include "locoman/depth_camera.hpp"
#include "locoman/gait.hpp"
#include "locoman/goal_sampler.hpp"
#include "locoman/kinematics.hpp"
#include "locoman/rewards.hpp"
#include "locoman/rng.hpp"

namespace locoman {

/// Full robot state of the 19-DoF platform (12 leg + 6 arm + gripper).
struct RobotState {
  Pose base;  // world
  Eigen::Vector3d base_lin_vel = Eigen::Vector3d::Zero();  // base frame
  Eigen::Vector3d base_ang_vel = Eigen::Vector3d::Zero();  // base frame
  Eigen::VectorXd leg_q = Eigen::VectorXd::Zero(12);
  Eigen::VectorXd leg_dq = Eigen::VectorXd::Zero(12);
  Eigen::VectorXd arm_q = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd arm_dq = Eigen::VectorXd::Zero(6);
  double gripper = 1.0;  // 1 open, 0 closed
  std::array<bool, 4> foot_contact = {true, true, true, true};

  // step bookkeeping consumed by the reward table
  Eigen::VectorXd leg_torque = Eigen::VectorXd::Zero(12);
  std::array<double, 4> foot_air_time = {0, 0, 0, 0};
  std::array<bool, 4> foot_touchdown = {false, false, false, false};
  std::array<double, 4> foot_force = {0, 0, 0, 0};
  std::array<double, 4> foot_vel_z = {0, 0, 0, 0};
  int collision_count = 0;
};

/// Manipulated primitive plus its support surface.
struct SceneObject {
  PrimitiveKind kind = PrimitiveKind::sphere;
  Eigen::Vector3d dimensions = {0.035, 0.035, 0.035};
  Pose pose;
  double surface_height = 0.0;  // top of the supporting surface
  bool attached = false;
  Eigen::Vector3d grasp_offset = Eigen::Vector3d::Zero();  // off-center grasp point

  Eigen::Vector3d grasp_point() const { return pose.apply(grasp_offset); }
  double half_height() const;
};

struct RandomizationProfile {
  std::array<double, 2> friction = {0.4, 1.25};
  std::array<double, 2> base_mass_scale = {0.85, 1.15};
  std::array<double, 2> arm_mass_scale = {0.85, 1.15};
  std::array<double, 2> com_offset = {-0.03, 0.03};  // per axis, meters
  std::array<double, 2> motor_strength = {0.9, 1.1};
  std::array<double, 2> arm_kp = {60.0, 100.0};
  std::array<double, 2> arm_kd = {1.5, 2.5};
  std::array<int, 2> calls_per_high = {6, 8};
  std::array<int, 2> camera_latency = {0, 2};  // low-level steps
  std::array<double, 2> table_height = {0.0, 0.5};
};

/// One concrete episode draw; recorded in logs for reproducibility.
struct EpisodeParams {
  double friction = 0.8;
  double base_mass_scale = 1.0;
  double arm_mass_scale = 1.0;
  Eigen::Vector3d com_offset = Eigen::Vector3d::Zero();
  double motor_strength = 1.0;
  double arm_kp = 80.0;
  double arm_kd = 2.0;
  int calls_per_high = 7;
  int camera_latency = 0;
  double table_height = 0.3;
  uint64_t draw_id = 0;

  /// Each draw mapped into [-1,1] by its range, zero-padded to 20 (z_env).
  Eigen::VectorXd normalized(const RandomizationProfile& profile) const;
};

EpisodeParams apply_randomization(const RandomizationProfile& profile, Rng& rng);

inline constexpr int kExtrinsicsDim = 20;

struct LowCommand {
  Eigen::Vector3d p_cmd = Eigen::Vector3d::Zero();  // invariant frame, meters
  Eigen::Vector3d o_cmd = Eigen::Vector3d::Zero();  // Euler
  double v_lin = 0.0;
  double yaw_rate = 0.0;

  LowCommand clipped(double v_limit = 0.6, double yaw_limit = 1.0) const;
  Eigen::Matrix<double, 8, 1> vector() const;
};

/// 9 numbers: gripper pose increment (6), velocity command (2), gripper bit.
struct HighAction {
  Eigen::Matrix<double, 6, 1> dpose = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  bool gripper_close = false;

  Eigen::Matrix<double, 9, 1> vector() const;
  /// Raw policy output -> action; the gripper logit thresholds at 0.5.
  static HighAction from_vector(const Eigen::Matrix<double, 9, 1>& v);
};

struct SurrogateParams {
  double dt = 0.02;  // 50 Hz low-level
  double leg_kp = 400.0;   // mass-normalized; must track the gait frequency
  double leg_kd = 40.0;
  double leg_inertia = 0.25;  // kg m^2, maps PD acceleration to torque
  double base_gain = 6.0;          // 1/s first-order velocity tracking
  double vel_noise = 0.0;          // additive command-tracking noise
  bool gait_coupling = true;       // stepping quality gates command tracking
  int arm_substeps = 16;           // 800 Hz arm loop within one low tick
  double arm_max_speed = 3.0;      // rad/s joint speed limit
  double contact_threshold = 0.02; // foot height below which contact holds
  double robot_mass = 60.0;        // kg, for contact force split
  double thigh_len = 0.35;
  double calf_len = 0.35;
};

struct LowStepInput {
  Eigen::VectorXd leg_targets;  // 12 absolute joint targets
  Pose ee_target_base;          // end-effector target in the base frame
  double v_lin_cmd = 0.0;
  double yaw_rate_cmd = 0.0;
};

/// Nominal standing posture (hip, thigh, calf per leg).
Eigen::VectorXd default_leg_posture();

/// Vertical leg extension of one leg (hip ignored; planar two-segment model).
double leg_extension(double thigh, double calf, const SurrogateParams& p);

/// Dynamics surrogate step: PD legs, first-order base-velocity tracking
/// (optionally gated by contact-schedule agreement), IK-integrated arm.
RobotState step_low(const RobotState& s, const LowStepInput& in, const KinematicChain& arm,
                    const SurrogateParams& p, const EpisodeParams& ep, const GaitSchedule& gait,
                    double time, Rng& rng);

/// Mean per-foot agreement between actual contact and the commanded
/// schedule, in [0,1].
double contact_agreement(const RobotState& s, const GaitSchedule& gait, double time);

/// One damped-pseudoinverse micro step of the arm toward a base-frame target,
/// joint speed limited (shared by step_low substeps and the 800 Hz arm loop).
Eigen::VectorXd arm_ik_step_toward(const KinematicChain& arm, const Eigen::VectorXd& q,
                                   const Pose& target_base, double max_step);

/// Scripted legs that follow the commanded contact schedule (reference gait
/// controller used as a stand-in for a trained low-level checkpoint). The
/// phase lead compensates the PD tracking lag. Near-zero commanded speed
/// collapses the trot into quiet standing.
Eigen::VectorXd gait_reference_legs(const GaitSchedule& gait, double time,
                                    const SurrogateParams& p, double phase_lead = 0.06,
                                    double commanded_speed = 1.0);

// ---------------------------------------------------------------------------
// Observation assembly

struct ObsLowLayout {
  static constexpr int kBase = 0;      // roll, pitch, wx, wy, wz
  static constexpr int kArm = 5;       // q(6), dq(6)
  static constexpr int kLeg = 17;      // q(12), dq(12), contacts(4)
  static constexpr int kPrevAction = 45;
  static constexpr int kExtrinsics = 57;
  static constexpr int kTiming = 77;
  static constexpr int kCommand = 82;
  static constexpr int kTotal = 90;
};

Eigen::VectorXd assemble_obs_low(const RobotState& s, const Eigen::VectorXd& prev_action,
                                 const Eigen::VectorXd& z_env,
                                 const Eigen::Matrix<double, 5, 1>& timing,
                                 const LowCommand& command);

/// The observation with the extrinsics slot zeroed, for callers that inject
/// an encoder/adaptation latent afterwards.
Eigen::VectorXd assemble_obs_low_no_z(const RobotState& s, const Eigen::VectorXd& prev_action,
                                      const Eigen::Matrix<double, 5, 1>& timing,
                                      const LowCommand& command);

/// End-effector pose in the arm-base frame.
Pose ee_pose_arm_base(const RobotState& s, const KinematicChain& arm);

/// Privileged vector [z_shape, s_obj(6), s_proprio(43), v_base(3), a_prev(9)];
/// length = shape_latent.size() + 61.
Eigen::VectorXd assemble_obs_privileged(const RobotState& s, const SceneObject& object,
                                        const Eigen::VectorXd& shape_latent,
                                        const Eigen::Matrix<double, 9, 1>& prev_high_action,
                                        const KinematicChain& arm);

// ---------------------------------------------------------------------------

enum class PickupStatus { ongoing, success, fail };

/// Success: lifted success_lift above the support surface while grasped.
/// Fail: fell below the surface by fall_margin, or the step budget elapsed.
PickupStatus pickup_status(const SceneObject& object, double initial_surface_height,
                           bool grasped, int high_steps, int max_high_steps = 150,
                           double success_lift = 0.1, double fall_margin = 0.05);

/// Deterministic analytic shape descriptor standing in for a learned point
/// cloud encoder: 256 surface samples, centered 2nd/3rd moments + extents,
/// projected through a fixed seeded random matrix.
Eigen::VectorXd shape_feature(const SceneObject& object, int latent_dim);

/// Surface point sampler used by shape_feature (exposed for tests).
std::vector<Eigen::Vector3d> sample_surface_points(const SceneObject& object, int count);

struct TeleportResult {
  bool moved = false;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// With the given probability, draw a new object position uniformly within
/// the support extent around the current position.
TeleportResult teleport_object(Rng& rng, double probability, const Eigen::Vector3d& current,
                               double surface_extent = 0.25);

}  // namespace locoman
