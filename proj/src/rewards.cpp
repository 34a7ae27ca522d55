#include "locoman/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace locoman {

double tracking_kernel(const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::invalid_argument("tracking_kernel: non-finite input");
  return std::exp(-x.squaredNorm() / 0.25);
}

double tracking_kernel(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("tracking_kernel: non-finite input");
  return std::exp(-x * x / 0.25);
}

LowRewardConfig::LowRewardConfig() {
  default_joint_position.resize(12);
  // hip, thigh, calf per leg
  default_joint_position << 0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5;
}

const std::array<const char*, kLowRewardTerms> kLowRewardNames = {
    "lin_vel_tracking",   "yaw_vel_tracking", "angular_velocity_penalty",
    "joint_torques",      "action_rate",      "collisions",
    "feet_air_time",      "default_joint_position", "linear_velocity_z",
    "base_height",        "swing_phase_force", "stance_phase_velocity"};

RewardBreakdown low_level_reward(const LowRewardInputs& in, const LowRewardConfig& cfg) {
  if (in.leg_joint_positions.size() != 12 || in.action.size() != 12)
    throw std::invalid_argument("low_level_reward: leg joints and action must be 12-dim");
  if (cfg.default_joint_position.size() != 12)
    throw std::invalid_argument("low_level_reward: default joint posture must be 12-dim");

  Eigen::VectorXd raw(kLowRewardTerms), weighted(kLowRewardTerms);

  const Eigen::Vector2d v_err(in.command_lin_vel - in.base_lin_vel_xy.x(),
                              0.0 - in.base_lin_vel_xy.y());
  raw[0] = std::exp(-v_err.squaredNorm() / 0.25);
  raw[1] = tracking_kernel(in.command_yaw_rate - in.base_yaw_rate);
  raw[2] = -in.base_ang_vel_xy.squaredNorm();
  raw[3] = -in.joint_torques.squaredNorm();
  raw[4] = -in.action.squaredNorm();
  raw[5] = -static_cast<double>(in.collision_count);

  double air_time = 0.0;
  for (int foot = 0; foot < 4; ++foot)
    if (in.foot_touchdown[static_cast<size_t>(foot)])
      air_time += in.foot_air_time[static_cast<size_t>(foot)] - 0.5;
  raw[6] = air_time;

  raw[7] = std::exp(-0.05 * (in.leg_joint_positions - cfg.default_joint_position).norm());
  raw[8] = in.base_lin_vel_z * in.base_lin_vel_z;
  raw[9] = std::abs(in.base_height - cfg.target_base_height);

  double swing_force = 0.0, stance_vel = 0.0;
  for (int foot = 0; foot < 4; ++foot) {
    const double c = desired_contact(in.gait, in.time, foot);
    const double f = in.foot_contact_force[static_cast<size_t>(foot)];
    const double vz = in.foot_velocity_z[static_cast<size_t>(foot)];
    swing_force += (1.0 - c) * (1.0 - std::exp(-(f * f) / cfg.sigma_cf));
    stance_vel += c * (1.0 - std::exp(-(vz * vz) / cfg.sigma_cv));
  }
  raw[10] = swing_force;
  raw[11] = stance_vel;

  const double weights[kLowRewardTerms] = {
      cfg.w_lin_vel_tracking,  cfg.w_yaw_vel_tracking, cfg.w_angular_velocity_penalty,
      cfg.w_joint_torques,     cfg.w_action_rate,      cfg.w_collisions,
      cfg.w_feet_air_time,     cfg.w_default_joint_position, cfg.w_linear_velocity_z,
      cfg.w_base_height,       cfg.w_swing_phase_force, cfg.w_stance_phase_velocity};

  RewardBreakdown out;
  out.raw = raw;
  out.weighted = weighted;
  double total = 0.0;
  for (int i = 0; i < kLowRewardTerms; ++i) {
    out.weighted[i] = weights[i] * raw[i];
    total += out.weighted[i];  // fixed table order
  }
  out.total = total;
  return out;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::approach: return "approach";
    case Stage::progress: return "progress";
    case Stage::completion: return "completion";
  }
  return "?";
}

EpisodeState stage_transition(const EpisodeState& ep, double gripper_obj_distance,
                              double object_height, bool completion_predicate) {
  EpisodeState out = ep;
  if (!out.initialized) {
    out.prev_d_closest = gripper_obj_distance;
    out.prev_d_highest = object_height;
    out.d_closest = gripper_obj_distance;
    out.d_highest = object_height;
    out.initial_height = object_height;
    out.initialized = true;
  } else {
    out.prev_d_closest = out.d_closest;
    out.prev_d_highest = out.d_highest;
    out.d_closest = std::min(out.d_closest, gripper_obj_distance);
    out.d_highest = std::max(out.d_highest, object_height);
  }
  out.step_count = ep.step_count + 1;

  if (completion_predicate) {
    out.stage = Stage::completion;
    out.success = true;  // latched even if the predicate later drops
  } else if (out.stage == Stage::completion) {
    out.stage = Stage::progress;  // completion is predicate-driven, not absorbing
  } else if (out.stage == Stage::approach &&
             object_height > out.initial_height + EpisodeState::kLiftEpsilon) {
    out.stage = Stage::progress;
  }
  return out;
}

const std::array<const char*, kHighRewardTerms> kHighRewardNames = {
    "approach", "progress", "completion", "acc",          "cmd",
    "action",   "ee_orn",   "base_orn",   "base_approach"};

namespace {

double cos_angle(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
  const double nu = u.norm(), nv = v.norm();
  if (nu < 1e-12 || nv < 1e-12) return 0.0;  // degenerate geometry
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

}  // namespace

RewardBreakdown high_level_reward(const EpisodeState& ep, const HighRewardInputs& in,
                                  const HighRewardConfig& cfg) {
  if (in.arm_joint_velocity.size() != in.prev_arm_joint_velocity.size())
    throw std::invalid_argument("high_level_reward: arm velocity dim mismatch");
  if (in.action.size() != in.prev_action.size())
    throw std::invalid_argument("high_level_reward: action dim mismatch");

  Eigen::VectorXd raw = Eigen::VectorXd::Zero(kHighRewardTerms);

  const double approach_delta = ep.prev_d_closest - in.gripper_obj_distance;
  const double progress_delta = in.object_height - ep.prev_d_highest;
  switch (ep.stage) {
    case Stage::approach:
      raw[0] = cfg.positive_progress ? std::max(approach_delta, 0.0)
                                     : std::min(approach_delta, 0.0);
      break;
    case Stage::progress:
      raw[1] = cfg.positive_progress ? std::max(progress_delta, 0.0)
                                     : std::min(progress_delta, 0.0);
      break;
    case Stage::completion:
      raw[2] = 1.0;
      break;
  }

  raw[3] = 1.0 - std::exp(-(in.prev_arm_joint_velocity - in.arm_joint_velocity).norm());
  raw[4] = cfg.cmd_term_active
               ? -std::abs(in.command_lin_vel) + 0.25 * std::exp(-std::abs(in.command_lin_vel))
               : 0.0;
  raw[5] = 1.0 - std::exp(-(in.prev_action - in.action).norm());
  raw[6] = cos_angle(in.dir_body_to_obj, in.dir_ee_to_obj);
  raw[7] = cos_angle(in.dir_body_to_obj, in.dir_base_heading);
  raw[8] = 1.0 + std::tanh(-10.0 * std::abs((in.obj_position - in.base_position).norm() - 0.6));

  const double weights[kHighRewardTerms] = {cfg.w_approach, cfg.w_progress, cfg.w_completion,
                                            cfg.w_acc,      cfg.w_cmd,      cfg.w_action,
                                            cfg.w_ee_orn,   cfg.w_base_orn, cfg.w_base_approach};

  RewardBreakdown out;
  out.raw = raw;
  out.weighted.resize(kHighRewardTerms);
  double total = 0.0;
  for (int i = 0; i < kHighRewardTerms; ++i) {
    out.weighted[i] = weights[i] * raw[i];
    total += out.weighted[i];
  }
  out.total = total;
  return out;
}

}  // namespace locoman
