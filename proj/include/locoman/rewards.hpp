#pragma once

#include <Eigen/Dense>
#include <array>
#include <limits>
#include <string>

#include "locoman/gait.hpp"

namespace locoman {

/// Tracking kernel exp(-||x||^2 / 0.25).
double tracking_kernel(const Eigen::VectorXd& x);
double tracking_kernel(double x);

/// Weights and scales for the 12-term low-level reward. Defaults are the
/// published table values.
struct LowRewardConfig {
  double w_lin_vel_tracking = 1.0;
  double w_yaw_vel_tracking = 0.5;
  double w_angular_velocity_penalty = 0.05;
  double w_joint_torques = 0.00002;
  double w_action_rate = 0.25;
  double w_collisions = 0.001;
  double w_feet_air_time = 2.0;
  double w_default_joint_position = 1.0;
  double w_linear_velocity_z = -1.5;
  double w_base_height = -5.0;
  double w_swing_phase_force = -0.2;
  double w_stance_phase_velocity = -0.2;

  double sigma_cf = 100.0;  // N^2
  double sigma_cv = 1.0;    // (m/s)^2
  double target_base_height = 0.5;
  Eigen::VectorXd default_joint_position;  // 12 leg angles

  LowRewardConfig();
};

/// Everything the low-level table reads. Quantities the table does not cite
/// (arm joints, gripper) are deliberately absent.
struct LowRewardInputs {
  Eigen::Vector2d base_lin_vel_xy = Eigen::Vector2d::Zero();
  double base_yaw_rate = 0.0;
  Eigen::Vector2d base_ang_vel_xy = Eigen::Vector2d::Zero();
  double base_lin_vel_z = 0.0;
  double base_height = 0.5;
  Eigen::VectorXd leg_joint_positions;   // 12
  Eigen::VectorXd joint_torques;         // 12
  Eigen::VectorXd action;                // 12 target leg positions
  int collision_count = 0;
  std::array<double, 4> foot_air_time = {0, 0, 0, 0};   // seconds, valid on touchdown
  std::array<bool, 4> foot_touchdown = {false, false, false, false};
  std::array<double, 4> foot_contact_force = {0, 0, 0, 0};  // N
  std::array<double, 4> foot_velocity_z = {0, 0, 0, 0};     // m/s

  double command_lin_vel = 0.0;  // v_x^*
  double command_yaw_rate = 0.0;

  GaitSchedule gait;
  double time = 0.0;
};

inline constexpr int kLowRewardTerms = 12;
extern const std::array<const char*, kLowRewardTerms> kLowRewardNames;

struct RewardBreakdown {
  Eigen::VectorXd weighted;  // weight_i * term_i, in table order
  Eigen::VectorXd raw;       // term_i
  double total = 0.0;
};

RewardBreakdown low_level_reward(const LowRewardInputs& in, const LowRewardConfig& cfg);

/// Stage + assistant weights for the task reward. Defaults are the published
/// table values.
struct HighRewardConfig {
  double w_approach = 0.5;
  double w_progress = 1.0;
  double w_completion = 3.5;
  double w_acc = -0.001;
  double w_cmd = 1.0;
  double w_action = -0.001;
  double w_ee_orn = 0.01;
  double w_base_orn = 0.25;
  double w_base_approach = 0.01;

  /// Verbatim stage terms are min(..., 0); the positive-progress mode rewards
  /// improvement of the running extrema instead.
  bool positive_progress = false;
  /// r_cmd gating (reward curriculum); the term contributes 0 while false.
  bool cmd_term_active = true;
};

enum class Stage { approach, progress, completion };

const char* stage_name(Stage s);

/// Pickup-task bookkeeping folded over the episode.
struct EpisodeState {
  Stage stage = Stage::approach;
  double d_closest = std::numeric_limits<double>::infinity();   // running min distance
  double d_highest = -std::numeric_limits<double>::infinity();  // running max height
  double prev_d_closest = std::numeric_limits<double>::infinity();
  double prev_d_highest = -std::numeric_limits<double>::infinity();
  double initial_height = 0.0;
  int step_count = 0;
  bool success = false;
  bool initialized = false;

  /// Height rise over the initial running max that switches approach->progress.
  static constexpr double kLiftEpsilon = 0.005;
};

/// Fold one step of measurements into the episode state: running extrema,
/// stage machine, step count.
EpisodeState stage_transition(const EpisodeState& ep, double gripper_obj_distance,
                              double object_height, bool completion_predicate);

/// Geometry and command inputs for the assistant terms.
struct HighRewardInputs {
  double gripper_obj_distance = 0.0;
  double object_height = 0.0;
  Eigen::VectorXd arm_joint_velocity;       // current, 6
  Eigen::VectorXd prev_arm_joint_velocity;  // 6
  Eigen::VectorXd action;                   // 9
  Eigen::VectorXd prev_action;              // 9
  double command_lin_vel = 0.0;             // v_x^*
  Eigen::Vector3d dir_body_to_obj = Eigen::Vector3d::Zero();
  Eigen::Vector3d dir_ee_to_obj = Eigen::Vector3d::Zero();
  Eigen::Vector3d dir_base_heading = Eigen::Vector3d::Zero();
  Eigen::Vector3d obj_position = Eigen::Vector3d::Zero();   // world
  Eigen::Vector3d base_position = Eigen::Vector3d::Zero();  // world
};

inline constexpr int kHighRewardTerms = 9;
extern const std::array<const char*, kHighRewardTerms> kHighRewardNames;

/// Task reward after stage_transition has folded this step's measurements.
/// Exactly one stage term is active; assistant terms are always active.
RewardBreakdown high_level_reward(const EpisodeState& ep, const HighRewardInputs& in,
                                  const HighRewardConfig& cfg);

}  // namespace locoman
