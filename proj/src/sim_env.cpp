#include "locoman/sim_env.hpp"

#include <cmath>

namespace locoman {

double SceneObject::half_height() const {
  switch (kind) {
    case PrimitiveKind::sphere: return dimensions.x();
    case PrimitiveKind::box: return dimensions.z();
    case PrimitiveKind::cylinder: return dimensions.y();
  }
  return dimensions.x();
}

namespace {

double norm_range(double v, double lo, double hi) {
  if (hi - lo < 1e-12) return 0.0;
  return 2.0 * (v - lo) / (hi - lo) - 1.0;
}

}  // namespace

Eigen::VectorXd EpisodeParams::normalized(const RandomizationProfile& r) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(kExtrinsicsDim);
  int i = 0;
  z[i++] = norm_range(friction, r.friction[0], r.friction[1]);
  z[i++] = norm_range(base_mass_scale, r.base_mass_scale[0], r.base_mass_scale[1]);
  z[i++] = norm_range(arm_mass_scale, r.arm_mass_scale[0], r.arm_mass_scale[1]);
  for (int k = 0; k < 3; ++k) z[i++] = norm_range(com_offset[k], r.com_offset[0], r.com_offset[1]);
  z[i++] = norm_range(motor_strength, r.motor_strength[0], r.motor_strength[1]);
  z[i++] = norm_range(arm_kp, r.arm_kp[0], r.arm_kp[1]);
  z[i++] = norm_range(arm_kd, r.arm_kd[0], r.arm_kd[1]);
  z[i++] = norm_range(calls_per_high, r.calls_per_high[0], r.calls_per_high[1]);
  z[i++] = norm_range(camera_latency, r.camera_latency[0], r.camera_latency[1]);
  z[i++] = norm_range(table_height, r.table_height[0], r.table_height[1]);
  return z;
}

EpisodeParams apply_randomization(const RandomizationProfile& r, Rng& rng) {
  EpisodeParams p;
  p.friction = rng.uniform(r.friction[0], r.friction[1]);
  p.base_mass_scale = rng.uniform(r.base_mass_scale[0], r.base_mass_scale[1]);
  p.arm_mass_scale = rng.uniform(r.arm_mass_scale[0], r.arm_mass_scale[1]);
  for (int k = 0; k < 3; ++k) p.com_offset[k] = rng.uniform(r.com_offset[0], r.com_offset[1]);
  p.motor_strength = rng.uniform(r.motor_strength[0], r.motor_strength[1]);
  p.arm_kp = rng.uniform(r.arm_kp[0], r.arm_kp[1]);
  p.arm_kd = rng.uniform(r.arm_kd[0], r.arm_kd[1]);
  p.calls_per_high = rng.uniform_int(r.calls_per_high[0], r.calls_per_high[1]);
  p.camera_latency = rng.uniform_int(r.camera_latency[0], r.camera_latency[1]);
  p.table_height = rng.uniform(r.table_height[0], r.table_height[1]);
  return p;
}

LowCommand LowCommand::clipped(double v_limit, double yaw_limit) const {
  LowCommand c = *this;
  c.v_lin = std::clamp(v_lin, -v_limit, v_limit);
  c.yaw_rate = std::clamp(yaw_rate, -yaw_limit, yaw_limit);
  return c;
}

Eigen::Matrix<double, 8, 1> LowCommand::vector() const {
  Eigen::Matrix<double, 8, 1> v;
  v << p_cmd, o_cmd, v_lin, yaw_rate;
  return v;
}

Eigen::Matrix<double, 9, 1> HighAction::vector() const {
  Eigen::Matrix<double, 9, 1> v;
  v << dpose, velocity, (gripper_close ? 1.0 : 0.0);
  return v;
}

HighAction HighAction::from_vector(const Eigen::Matrix<double, 9, 1>& v) {
  HighAction a;
  a.dpose = v.head<6>();
  a.velocity = v.segment<2>(6);
  a.gripper_close = v[8] > 0.5;
  return a;
}

Eigen::VectorXd default_leg_posture() {
  Eigen::VectorXd q(12);
  q << 0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5, 0.0, 0.8, -1.5;
  return q;
}

double leg_extension(double thigh, double calf, const SurrogateParams& p) {
  return std::max(0.05, p.thigh_len * std::cos(thigh) + p.calf_len * std::cos(thigh + calf));
}

double contact_agreement(const RobotState& s, const GaitSchedule& gait, double time) {
  double sum = 0.0;
  for (int foot = 0; foot < 4; ++foot) {
    const double want = desired_contact(gait, time, foot);
    const double have = s.foot_contact[static_cast<size_t>(foot)] ? 1.0 : 0.0;
    sum += 1.0 - std::abs(want - have);
  }
  return sum / 4.0;
}

Eigen::VectorXd arm_ik_step_toward(const KinematicChain& arm, const Eigen::VectorXd& q,
                                   const Pose& target_base, double max_step) {
  const Pose cur = forward_kinematics(arm, q);
  Eigen::Matrix<double, 6, 1> err = pose_error(target_base, cur);
  if (err.head<3>().norm() < 1e-5 && err.tail<3>().norm() < 1e-4) return q;
  const Jacobian6 J = jacobian(arm, q);
  // Euler-rate correction keeps the step consistent with the Jacobian.
  const Eigen::Vector3d rpy = cur.euler();
  const double th = rpy.y(), ps = rpy.z();
  Eigen::Matrix3d E;
  E << std::cos(th) * std::cos(ps), -std::sin(ps), 0, std::cos(th) * std::sin(ps), std::cos(ps),
      0, -std::sin(th), 0, 1;
  err.tail<3>() = E * err.tail<3>();
  Eigen::VectorXd dq = ik_step(J, err, true, 0.05);
  for (int i = 0; i < dq.size(); ++i) dq[i] = std::clamp(dq[i], -max_step, max_step);
  return arm.clamp_to_limits(q + dq);
}

Eigen::VectorXd gait_reference_legs(const GaitSchedule& gait, double time,
                                    const SurrogateParams& p, double phase_lead,
                                    double commanded_speed) {
  (void)p;
  Eigen::VectorXd q = default_leg_posture();
  // stand quietly when there is nothing to track
  const double engage = std::clamp(std::abs(commanded_speed) / 0.05, 0.0, 1.0);
  if (engage <= 0.0) return q;
  for (int foot = 0; foot < 4; ++foot) {
    const double lift = engage * (1.0 - desired_contact(gait, time + phase_lead, foot));
    q[3 * foot + 1] = 0.8 + 0.10 * lift;
    q[3 * foot + 2] = -1.5 - 0.55 * lift;
  }
  return q;
}

RobotState step_low(const RobotState& s, const LowStepInput& in, const KinematicChain& arm,
                    const SurrogateParams& p, const EpisodeParams& ep, const GaitSchedule& gait,
                    double time, Rng& rng) {
  if (in.leg_targets.size() != 12) throw std::invalid_argument("step_low: leg targets must be 12");
  if (!in.leg_targets.allFinite() || !in.ee_target_base.position.allFinite())
    throw std::runtime_error("step_low: non-finite targets");
  const double dt = p.dt;
  RobotState out = s;

  // Legs: PD toward targets, semi-implicit Euler; torque recorded per joint.
  for (int i = 0; i < 12; ++i) {
    const double acc = ep.motor_strength * (p.leg_kp * (in.leg_targets[i] - s.leg_q[i]) -
                                            p.leg_kd * s.leg_dq[i]);
    out.leg_torque[i] = p.leg_inertia * acc;
    out.leg_dq[i] = s.leg_dq[i] + acc * dt;
    out.leg_q[i] = std::clamp(s.leg_q[i] + out.leg_dq[i] * dt, -3.0, 3.0);
  }

  // Foot heights from the two-segment leg model; contacts and air time.
  const double base_z_old = s.base.position.z();
  std::array<double, 4> ext{}, ext_old{};
  for (int foot = 0; foot < 4; ++foot) {
    ext[static_cast<size_t>(foot)] =
        leg_extension(out.leg_q[3 * foot + 1], out.leg_q[3 * foot + 2], p);
    ext_old[static_cast<size_t>(foot)] =
        leg_extension(s.leg_q[3 * foot + 1], s.leg_q[3 * foot + 2], p);
  }

  // Base height follows the stance-leg extension with a first-order lag.
  double ext_mean = 0.0;
  for (double e : ext) ext_mean += e;
  ext_mean /= 4.0;
  const double h_alpha = std::min(1.0, 10.0 * dt);
  const double new_z = base_z_old + h_alpha * (ext_mean - base_z_old);
  out.base.position.z() = new_z;

  int n_contact = 0;
  for (int foot = 0; foot < 4; ++foot) {
    const size_t f = static_cast<size_t>(foot);
    const double foot_z_old = base_z_old - ext_old[f];
    const double foot_z = new_z - ext[f];
    const bool contact = foot_z < p.contact_threshold;
    out.foot_vel_z[f] = (foot_z - foot_z_old) / dt;
    out.foot_touchdown[f] = contact && !s.foot_contact[f];
    if (contact) {
      ++n_contact;
      if (out.foot_touchdown[f]) {
        out.foot_air_time[f] = s.foot_air_time[f] + dt;  // report on touchdown
      } else {
        out.foot_air_time[f] = 0.0;
      }
    } else {
      out.foot_air_time[f] = s.foot_air_time[f] + dt;
    }
    out.foot_contact[f] = contact;
  }
  for (int foot = 0; foot < 4; ++foot) {
    const size_t f = static_cast<size_t>(foot);
    out.foot_force[f] = out.foot_contact[f]
                            ? p.robot_mass * ep.base_mass_scale * 9.81 / std::max(1, n_contact)
                            : 0.0;
  }

  // Base planar velocity: first-order tracking of the command, gated by how
  // well the legs execute the commanded contact schedule.
  double effectiveness = 1.0;
  if (p.gait_coupling) {
    const double agree = contact_agreement(out, gait, time);
    effectiveness = std::clamp((agree - 0.5) / 0.42, 0.0, 1.0);
  }
  const double alpha = std::min(1.0, p.base_gain * dt);
  const double noise = p.vel_noise > 0.0 ? rng.gaussian(0.0, p.vel_noise) : 0.0;
  out.base_lin_vel.x() =
      s.base_lin_vel.x() + alpha * (effectiveness * in.v_lin_cmd + noise - s.base_lin_vel.x());
  out.base_lin_vel.y() = s.base_lin_vel.y() * (1.0 - alpha);
  out.base_lin_vel.z() = (new_z - base_z_old) / dt;
  out.base_ang_vel.z() =
      s.base_ang_vel.z() + alpha * (effectiveness * in.yaw_rate_cmd - s.base_ang_vel.z());

  // Small static tilt from the randomized center-of-mass offset.
  const double roll = 0.5 * ep.com_offset.y();
  const double pitch = -0.5 * ep.com_offset.x();
  const Eigen::Vector3d rpy_old = s.base.euler();
  const double yaw = wrap_angle(rpy_old.z() + out.base_ang_vel.z() * dt);
  out.base_ang_vel.x() = wrap_angle(roll - rpy_old.x()) / dt;
  out.base_ang_vel.y() = wrap_angle(pitch - rpy_old.y()) / dt;
  out.base.orientation = quaternion_from_euler(roll, pitch, yaw);

  // Planar position integrates the yaw-rotated body velocity.
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  out.base.position.x() += (cy * out.base_lin_vel.x() - sy * out.base_lin_vel.y()) * dt;
  out.base.position.y() += (sy * out.base_lin_vel.x() + cy * out.base_lin_vel.y()) * dt;

  // Arm: IK integration toward the commanded end-effector pose at the fast
  // loop rate; kp speeds the joints up, kd damps them.
  Eigen::VectorXd q = s.arm_q;
  if (p.arm_substeps > 0) {
    const double dt_sub = dt / p.arm_substeps;
    const double rate_scale = (ep.arm_kp / 80.0) * (2.0 / std::max(0.5, ep.arm_kd));
    const double max_step = p.arm_max_speed * rate_scale * dt_sub;
    for (int sub = 0; sub < p.arm_substeps; ++sub)
      q = arm_ik_step_toward(arm, q, in.ee_target_base, max_step);
  }
  out.arm_dq = (q - s.arm_q) / dt;
  out.arm_q = q;

  out.collision_count = 0;  // collisions are scene logic, owned by the task env
  return out;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd assemble_obs_low(const RobotState& s, const Eigen::VectorXd& prev_action,
                                 const Eigen::VectorXd& z_env,
                                 const Eigen::Matrix<double, 5, 1>& timing,
                                 const LowCommand& command) {
  if (prev_action.size() != 12) throw std::invalid_argument("assemble_obs_low: prev action != 12");
  if (z_env.size() != kExtrinsicsDim)
    throw std::invalid_argument("assemble_obs_low: extrinsics != 20");
  Eigen::VectorXd o(ObsLowLayout::kTotal);
  const Eigen::Vector3d rpy = s.base.euler();
  o[0] = rpy.x();
  o[1] = rpy.y();
  o.segment<3>(2) = s.base_ang_vel;
  o.segment<6>(ObsLowLayout::kArm) = s.arm_q;
  o.segment<6>(ObsLowLayout::kArm + 6) = s.arm_dq;
  o.segment<12>(ObsLowLayout::kLeg) = s.leg_q;
  o.segment<12>(ObsLowLayout::kLeg + 12) = s.leg_dq;
  for (int f = 0; f < 4; ++f)
    o[ObsLowLayout::kLeg + 24 + f] = s.foot_contact[static_cast<size_t>(f)] ? 1.0 : 0.0;
  o.segment<12>(ObsLowLayout::kPrevAction) = prev_action;
  o.segment<kExtrinsicsDim>(ObsLowLayout::kExtrinsics) = z_env;
  o.segment<5>(ObsLowLayout::kTiming) = timing;
  o.segment<8>(ObsLowLayout::kCommand) = command.vector();
  return o;
}

Eigen::VectorXd assemble_obs_low_no_z(const RobotState& s, const Eigen::VectorXd& prev_action,
                                      const Eigen::Matrix<double, 5, 1>& timing,
                                      const LowCommand& command) {
  return assemble_obs_low(s, prev_action, Eigen::VectorXd::Zero(kExtrinsicsDim), timing, command);
}

Pose ee_pose_arm_base(const RobotState& s, const KinematicChain& arm) {
  return forward_kinematics(arm, s.arm_q);
}

Eigen::VectorXd assemble_obs_privileged(const RobotState& s, const SceneObject& object,
                                        const Eigen::VectorXd& shape_latent,
                                        const Eigen::Matrix<double, 9, 1>& prev_high_action,
                                        const KinematicChain& arm) {
  const int latent = static_cast<int>(shape_latent.size());
  Eigen::VectorXd o(latent + 61);
  int i = 0;
  o.segment(i, latent) = shape_latent;
  i += latent;

  // Object pose relative to the arm base (world -> base -> mount).
  const Pose arm_base_world = s.base * arm.mount();
  const Pose obj_local = arm_base_world.inverse() * object.pose;
  o.segment<3>(i) = obj_local.position;
  o.segment<3>(i + 3) = obj_local.euler();
  i += 6;

  // s_proprio: q(19), dq(18), ee pose (6)
  o.segment<12>(i) = s.leg_q;
  o.segment<6>(i + 12) = s.arm_q;
  o[i + 18] = s.gripper;
  i += 19;
  o.segment<12>(i) = s.leg_dq;
  o.segment<6>(i + 12) = s.arm_dq;
  i += 18;
  const Pose ee = ee_pose_arm_base(s, arm);
  o.segment<3>(i) = ee.position;
  o.segment<3>(i + 3) = ee.euler();
  i += 6;

  o.segment<3>(i) = s.base_lin_vel;
  i += 3;
  o.segment<9>(i) = prev_high_action;
  i += 9;
  if (i != o.size()) throw std::logic_error("assemble_obs_privileged: layout drift");
  return o;
}

PickupStatus pickup_status(const SceneObject& object, double initial_surface_height, bool grasped,
                           int high_steps, int max_high_steps, double success_lift,
                           double fall_margin) {
  if (grasped && object.pose.position.z() - initial_surface_height > success_lift)
    return PickupStatus::success;
  if (!grasped && object.pose.position.z() < initial_surface_height - fall_margin)
    return PickupStatus::fail;
  if (high_steps >= max_high_steps) return PickupStatus::fail;
  return PickupStatus::ongoing;
}

// ---------------------------------------------------------------------------
// Shape descriptor

std::vector<Eigen::Vector3d> sample_surface_points(const SceneObject& object, int count) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<size_t>(count));
  // Deterministic low-discrepancy driver shared by all shapes.
  uint64_t lcg = 0x853c49e6748fea9bULL ^ static_cast<uint64_t>(object.kind);
  auto next01 = [&lcg]() {
    lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(lcg >> 11) * 0x1.0p-53;
  };

  switch (object.kind) {
    case PrimitiveKind::sphere: {
      const double r = object.dimensions.x();
      const double golden = M_PI * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = golden * i;
        pts.emplace_back(r * rho * std::cos(a), r * rho * std::sin(a), r * z);
      }
      break;
    }
    case PrimitiveKind::box: {
      const Eigen::Vector3d h = object.dimensions;
      for (int i = 0; i < count; ++i) {
        const int face = i % 6;
        const double u = 2.0 * next01() - 1.0, v = 2.0 * next01() - 1.0;
        switch (face) {
          case 0: pts.emplace_back(h.x(), u * h.y(), v * h.z()); break;
          case 1: pts.emplace_back(-h.x(), u * h.y(), v * h.z()); break;
          case 2: pts.emplace_back(u * h.x(), h.y(), v * h.z()); break;
          case 3: pts.emplace_back(u * h.x(), -h.y(), v * h.z()); break;
          case 4: pts.emplace_back(u * h.x(), v * h.y(), h.z()); break;
          default: pts.emplace_back(u * h.x(), v * h.y(), -h.z()); break;
        }
      }
      break;
    }
    case PrimitiveKind::cylinder: {
      const double r = object.dimensions.x(), hh = object.dimensions.y();
      const double side_area = 2.0 * M_PI * r * 2.0 * hh;
      const double cap_area = 2.0 * M_PI * r * r;
      const double side_frac = side_area / (side_area + cap_area);
      for (int i = 0; i < count; ++i) {
        if (next01() < side_frac) {
          const double a = 2.0 * M_PI * next01();
          const double z = hh * (2.0 * next01() - 1.0);
          pts.emplace_back(r * std::cos(a), r * std::sin(a), z);
        } else {
          const double a = 2.0 * M_PI * next01();
          const double rr = r * std::sqrt(next01());
          const double z = next01() < 0.5 ? hh : -hh;
          pts.emplace_back(rr * std::cos(a), rr * std::sin(a), z);
        }
      }
      break;
    }
  }
  return pts;
}

Eigen::VectorXd shape_feature(const SceneObject& object, int latent_dim) {
  if (latent_dim < 8) throw std::invalid_argument("shape_feature: latent_dim must be >= 8");
  const auto pts = sample_surface_points(object, 256);

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());

  Eigen::VectorXd desc = Eigen::VectorXd::Zero(19);
  Eigen::Vector3d lo = pts.front(), hi = pts.front();
  for (const auto& p : pts) {
    const Eigen::Vector3d c = p - mean;
    desc[0] += c.x() * c.x();
    desc[1] += c.y() * c.y();
    desc[2] += c.z() * c.z();
    desc[3] += c.x() * c.y();
    desc[4] += c.x() * c.z();
    desc[5] += c.y() * c.z();
    desc[6] += c.x() * c.x() * c.x();
    desc[7] += c.y() * c.y() * c.y();
    desc[8] += c.z() * c.z() * c.z();
    desc[9] += c.x() * c.x() * c.y();
    desc[10] += c.x() * c.x() * c.z();
    desc[11] += c.x() * c.y() * c.y();
    desc[12] += c.y() * c.y() * c.z();
    desc[13] += c.x() * c.z() * c.z();
    desc[14] += c.y() * c.z() * c.z();
    desc[15] += c.x() * c.y() * c.z();
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  desc.head(16) /= static_cast<double>(pts.size());
  desc.segment<3>(16) = hi - lo;

  // Fixed seeded projection: the same descriptor always lands on the same
  // latent, independent of any environment rng.
  Rng proj_rng(0xC0FFEEULL + static_cast<uint64_t>(latent_dim));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(latent_dim);
  for (int r = 0; r < latent_dim; ++r)
    for (int c = 0; c < 19; ++c) out[r] += proj_rng.gaussian() / std::sqrt(19.0) * desc[c];
  return out;
}

TeleportResult teleport_object(Rng& rng, double probability, const Eigen::Vector3d& current,
                               double surface_extent) {
  TeleportResult r;
  if (!rng.bernoulli(probability)) return r;
  r.moved = true;
  r.position = current + Eigen::Vector3d(rng.uniform(-surface_extent, surface_extent),
                                         rng.uniform(-surface_extent, surface_extent), 0.0);
  return r;
}

}  // namespace locoman
