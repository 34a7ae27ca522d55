#include "locoman/pickup_env.hpp"

#include <cmath>

namespace locoman {

namespace {

/// Command pose in the invariant frame -> end-effector target in the base frame.
Pose invariant_cmd_to_base(const Pose& base, double origin_height,
                           const Eigen::Vector3d& p_cmd, const Eigen::Vector3d& o_cmd) {
  const InvariantFrame frame = InvariantFrame::from_base(base, origin_height);
  const Eigen::Vector3d world_p = frame.to_world(p_cmd);
  const Eigen::Quaterniond world_q =
      quaternion_from_euler(0.0, 0.0, frame.yaw) * quaternion_from_euler(o_cmd);
  const Pose inv = base.inverse();
  return Pose{inv.apply(world_p), (inv.orientation * world_q).normalized()};
}

}  // namespace

// ---------------------------------------------------------------------------
// GoalTrackEnv

GoalTrackEnv::GoalTrackEnv(GoalTrackConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed), arm_(KinematicChain::default_arm()) {
  reset();
}

void GoalTrackEnv::reset() {
  params_ = apply_randomization(cfg_.randomization, rng_);
  state_ = RobotState{};
  state_.leg_q = default_leg_posture();
  state_.arm_q = Eigen::VectorXd::Zero(6);
  state_.arm_q << 0.0, -0.73, 1.57, 0.0, -0.35, 0.0;  // hand forward, clear of the torso
  state_.arm_q = arm_.clamp_to_limits(state_.arm_q);
  double ext = 0.0;
  for (int f = 0; f < 4; ++f)
    ext += leg_extension(state_.leg_q[3 * f + 1], state_.leg_q[3 * f + 2], cfg_.surrogate);
  state_.base.position = {0.0, 0.0, ext / 4.0};

  command_ = LowCommand{};
  command_.v_lin = cfg_.fixed_v_cmd ? *cfg_.fixed_v_cmd
                                    : rng_.uniform(cfg_.v_cmd_range[0], cfg_.v_cmd_range[1]);
  command_.yaw_rate = rng_.uniform(cfg_.yaw_cmd_range[0], cfg_.yaw_cmd_range[1]);

  time_ = 0.0;
  traj_t_ = 0.0;
  prev_action_.setZero();
  history_.clear();
  resample_goal();
  push_history();
}

void GoalTrackEnv::resample_goal() {
  const InvariantFrame frame =
      InvariantFrame::from_base(state_.base, cfg_.invariant_origin_height);
  const Pose ee_base = ee_pose_arm_base(state_, arm_);
  const Eigen::Vector3d ee_world = state_.base.apply(ee_base.position);

  GoalTrajectory traj;
  traj.start = frame.to_frame(ee_world);
  traj.duration = cfg_.resample_period;
  const SampledGoal g = sample_goal(rng_, cfg_.goal_ranges);
  traj.end = g.position;
  traj.orientation = g.orientation;
  traj_ = resample_on_violation(traj, cfg_.body_geometry, rng_, cfg_.goal_ranges).trajectory;
  traj_t_ = 0.0;

  command_.p_cmd = interpolate(traj_, 0.0);
  command_.o_cmd = euler_from_quaternion(traj_.orientation);
}

void GoalTrackEnv::push_history() {
  const Eigen::VectorXd obs = obs_no_z();
  Eigen::VectorXd feat(70);
  feat.head(57) = obs.head(57);
  feat.tail(13) = obs.tail(13);
  history_.push_back(std::move(feat));
  while (static_cast<int>(history_.size()) > cfg_.obs_history) history_.pop_front();
}

GoalTrackEnv::StepOut GoalTrackEnv::step(const Eigen::VectorXd& action12) {
  if (action12.size() != 12) throw std::invalid_argument("GoalTrackEnv::step: action must be 12");

  LowStepInput in;
  in.leg_targets = default_leg_posture() + cfg_.action_scale * action12;
  in.ee_target_base = invariant_cmd_to_base(state_.base, cfg_.invariant_origin_height,
                                            command_.p_cmd, command_.o_cmd);
  in.v_lin_cmd = command_.v_lin;
  in.yaw_rate_cmd = command_.yaw_rate;

  state_ = step_low(state_, in, arm_, cfg_.surrogate, params_, cfg_.gait, time_, rng_);
  time_ += cfg_.surrogate.dt;
  traj_t_ += cfg_.surrogate.dt;

  command_.p_cmd = interpolate(traj_, traj_t_);
  if (traj_t_ >= cfg_.resample_period) resample_goal();

  LowRewardInputs ri;
  ri.base_lin_vel_xy = state_.base_lin_vel.head<2>();
  ri.base_yaw_rate = state_.base_ang_vel.z();
  ri.base_ang_vel_xy = state_.base_ang_vel.head<2>();
  ri.base_lin_vel_z = state_.base_lin_vel.z();
  ri.base_height = state_.base.position.z();
  ri.leg_joint_positions = state_.leg_q;
  ri.joint_torques = state_.leg_torque;
  ri.action = action12;
  ri.collision_count = state_.collision_count;
  ri.foot_air_time = state_.foot_air_time;
  ri.foot_touchdown = state_.foot_touchdown;
  ri.foot_contact_force = state_.foot_force;
  ri.foot_velocity_z = state_.foot_vel_z;
  ri.command_lin_vel = command_.v_lin;
  ri.command_yaw_rate = command_.yaw_rate;
  ri.gait = cfg_.gait;
  ri.time = time_;

  StepOut out;
  out.breakdown = low_level_reward(ri, cfg_.reward);
  out.reward = out.breakdown.total;
  out.tracking_kernel_value = tracking_kernel(command_.v_lin - state_.base_lin_vel.x());

  const InvariantFrame frame =
      InvariantFrame::from_base(state_.base, cfg_.invariant_origin_height);
  const Eigen::Vector3d ee_world =
      state_.base.apply(ee_pose_arm_base(state_, arm_).position);
  out.ee_pos_error = (frame.to_world(command_.p_cmd) - ee_world).norm();
  out.done = time_ >= cfg_.episode_seconds;

  prev_action_ = action12;
  push_history();
  return out;
}

Eigen::VectorXd GoalTrackEnv::obs_no_z() const {
  return assemble_obs_low_no_z(state_, prev_action_, timing_reference(cfg_.gait, time_),
                               command_);
}

Eigen::MatrixXd GoalTrackEnv::obs_history() const {
  Eigen::MatrixXd h(70, cfg_.obs_history);
  const int n = static_cast<int>(history_.size());
  for (int t = 0; t < cfg_.obs_history; ++t) {
    const int idx = std::max(0, n - cfg_.obs_history + t);
    h.col(t) = history_[static_cast<size_t>(std::min(idx, n - 1))];
  }
  return h;
}

// ---------------------------------------------------------------------------
// PickupEnv

PickupEnv::PickupEnv(PickupEnvConfig cfg, uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed), arm_(KinematicChain::default_arm()) {
  reset();
}

void PickupEnv::place_object(const Eigen::Vector3d& xy_center) {
  object_.pose.position = {xy_center.x(), xy_center.y(), table_top_ + object_.half_height()};
  if (object_.kind != PrimitiveKind::sphere)
    object_.pose.orientation = quaternion_from_euler(0.0, 0.0, rng_.uniform(-M_PI, M_PI));
  else
    object_.pose.orientation = Eigen::Quaterniond::Identity();
}

void PickupEnv::reset() {
  params_ = apply_randomization(cfg_.randomization, rng_);
  params_.draw_id = rng_.next_u64();
  if (cfg_.fixed_table_height) params_.table_height = *cfg_.fixed_table_height;
  table_top_ = params_.table_height;

  state_ = RobotState{};
  state_.leg_q = default_leg_posture();
  state_.arm_q << 0.0, -0.73, 1.57, 0.0, -0.35, 0.0;
  state_.arm_q = arm_.clamp_to_limits(state_.arm_q);
  state_.gripper = 1.0;
  double ext = 0.0;
  for (int f = 0; f < 4; ++f)
    ext += leg_extension(state_.leg_q[3 * f + 1], state_.leg_q[3 * f + 2], cfg_.surrogate);
  state_.base.position = {0.0, rng_.uniform(-cfg_.start_jitter, cfg_.start_jitter), ext / 4.0};
  state_.base.orientation =
      quaternion_from_euler(0.0, 0.0, rng_.uniform(-0.15, 0.15));

  table_center_ = {cfg_.start_distance + 0.2, rng_.uniform(-0.15, 0.15), 0.0};
  object_ = SceneObject{};
  object_.kind = cfg_.object_kind;
  object_.dimensions = cfg_.object_dims;
  object_.surface_height = table_top_;
  object_.attached = false;
  place_object(table_center_ + Eigen::Vector3d(rng_.uniform(-cfg_.object_lateral_jitter, 0.0),
                                               rng_.uniform(-cfg_.object_lateral_jitter,
                                                            cfg_.object_lateral_jitter),
                                               0.0));
  shape_latent_ = shape_feature(object_, cfg_.shape_latent_dim);

  episode_ = EpisodeState{};
  status_ = PickupStatus::ongoing;
  held_command_ = LowCommand{};
  pending_.reset();
  last_applied_ = HighAction{};
  prev_low_action_.setZero();
  prev_arm_dq_.setZero();
  prev_emitted_vec_.setZero();
  prev_applied_vec_.setZero();
  prev_applied_close_ = false;
  open_streak_ = 0;
  stop_latch_ = 0;
  time_ = 0.0;
  high_steps_ = 0;
  emitted_log_.clear();
  applied_log_.clear();
  v_cmd_log_.clear();
  gripper_cmd_log_.clear();

  // start the ee command at the current hand position
  const double u_start = rng_.uniform();
  const bool grasped_start = u_start < cfg_.grasped_start_prob;
  near_start_ = grasped_start || u_start < cfg_.grasped_start_prob + cfg_.near_start_prob;
  if (near_start_) {
    // reverse-curriculum spawn: beside the table, facing the object, with
    // the hand command primed at the grasp point
    const Eigen::Vector3d obj = object_.grasp_point();
    const double stand_off = rng_.uniform(near_standoff_lo_, near_standoff_hi_);
    const double bearing = rng_.uniform(-0.5, 0.5);
    const Eigen::Vector2d to_obj = (obj.head<2>() - state_.base.position.head<2>()).normalized();
    const Eigen::Rotation2Dd spread(bearing);
    const Eigen::Vector2d from_dir = spread * (-to_obj);
    state_.base.position.head<2>() = obj.head<2>() + stand_off * from_dir;
    const Eigen::Vector2d face = (obj.head<2>() - state_.base.position.head<2>()).normalized();
    const double yaw = std::atan2(face.y(), face.x()) + rng_.uniform(-0.25, 0.25);
    state_.base.orientation = quaternion_from_euler(0.0, 0.0, yaw);
    const InvariantFrame nf = InvariantFrame::from_base(state_.base, cfg_.invariant_origin_height);
    ee_cmd_.position = nf.to_frame(obj);
    if (!grasped_start) {
      // prime the hand near, not at, the object: the last reach (including
      // the descent) stays the policy's job
      // offsets span the whole transit from the neutral hand pose to the
      // object, so the command journey itself gets practiced; sometimes the
      // command stays at the hand entirely, as in an unprimed episode
      if (rng_.bernoulli(0.3)) {
        const InvariantFrame cf =
            InvariantFrame::from_base(state_.base, cfg_.invariant_origin_height);
        ee_cmd_.position = cf.to_frame(ee_world());
      } else {
        const double span = rng_.uniform(0.0, 1.0);
        ee_cmd_.position += Eigen::Vector3d(span * rng_.uniform(-0.40, 0.40),
                                            span * rng_.uniform(-0.40, 0.40),
                                            span * rng_.uniform(-0.05, 0.50));
      }
    }
    for (int i = 0; i < 3; ++i)
      ee_cmd_.position[i] = std::clamp(ee_cmd_.position[i], cfg_.ee_min[i], cfg_.ee_max[i]);
    {
      const Eigen::Vector3d rel = ee_cmd_.position - cfg_.ee_ball_center;
      if (rel.norm() > cfg_.ee_ball_radius)
        ee_cmd_.position = cfg_.ee_ball_center + cfg_.ee_ball_radius * rel.normalized();
    }
    ee_cmd_.orientation = Eigen::Quaterniond::Identity();
    if (grasped_start) {
      // settle the arm onto the primed command, then attach the object
      const Pose target = invariant_cmd_to_base(state_.base, cfg_.invariant_origin_height,
                                                ee_cmd_.position,
                                                euler_from_quaternion(ee_cmd_.orientation));
      for (int it = 0; it < 600; ++it)
        state_.arm_q = arm_ik_step_toward(arm_, state_.arm_q, target, 0.02);
      object_.pose.position = ee_world();
      object_.attached = true;
      const Pose ee_pose_world = state_.base * ee_pose_arm_base(state_, arm_);
      grasp_rel_ = ee_pose_world.inverse() * object_.pose;
      state_.gripper = 0.0;
      prev_applied_close_ = true;
      HighAction hold;
      hold.gripper_close = true;
      pending_ = hold;  // the delayed first action keeps the gripper shut
      last_applied_ = hold;
    }
  } else {
    const InvariantFrame frame =
        InvariantFrame::from_base(state_.base, cfg_.invariant_origin_height);
    ee_cmd_.position = frame.to_frame(ee_world());
    ee_cmd_.orientation = Eigen::Quaterniond::Identity();
  }

  if (cfg_.vision) {
    head_jitter_ = Pose{};
    wrist_jitter_ = Pose{};
    auto jit = [this]() {
      Pose p;
      p.position = {rng_.uniform(cfg_.cam_jitter_translation[0], cfg_.cam_jitter_translation[1]),
                    rng_.uniform(cfg_.cam_jitter_translation[0], cfg_.cam_jitter_translation[1]),
                    rng_.uniform(cfg_.cam_jitter_translation[0], cfg_.cam_jitter_translation[1])};
      p.orientation = quaternion_from_euler(
          rng_.uniform(cfg_.cam_jitter_rotation[0], cfg_.cam_jitter_rotation[1]),
          rng_.uniform(cfg_.cam_jitter_rotation[0], cfg_.cam_jitter_rotation[1]),
          rng_.uniform(cfg_.cam_jitter_rotation[0], cfg_.cam_jitter_rotation[1]));
      return p;
    };
    head_jitter_ = jit();
    wrist_jitter_ = jit();
    head_line_.emplace(params_.camera_latency);
    wrist_line_.emplace(params_.camera_latency);
    head_hist_.clear();
    wrist_hist_.clear();
    update_vision();
  }
}

Eigen::Vector3d PickupEnv::ee_world() const {
  return state_.base.apply(ee_pose_arm_base(state_, arm_).position);
}

Scene PickupEnv::render_scene() const {
  Scene scene;
  ScenePrimitive ground;
  ground.kind = PrimitiveKind::box;
  ground.dimensions = {50.0, 50.0, 0.05};
  ground.pose.position = {0.0, 0.0, -0.05};
  ground.id = 1;
  scene.objects.push_back(ground);
  if (table_top_ > 0.02) {
    ScenePrimitive table;
    table.kind = PrimitiveKind::box;
    table.dimensions = {cfg_.table_extent, cfg_.table_extent, table_top_ / 2.0};
    table.pose.position = {table_center_.x(), table_center_.y(), table_top_ / 2.0};
    table.id = 2;
    scene.objects.push_back(table);
  }
  ScenePrimitive obj;
  obj.kind = object_.kind;
  obj.dimensions = object_.dimensions;
  obj.pose = object_.pose;
  obj.id = 7;
  scene.objects.push_back(obj);
  scene.target_id = 7;
  return scene;
}

Pose PickupEnv::head_camera_pose() const {
  Pose mount;
  mount.position = {0.35, 0.0, 0.10};
  mount.orientation = quaternion_from_euler(0.0, 0.42, 0.0);  // pitched down
  return state_.base * mount * head_jitter_;
}

Pose PickupEnv::wrist_camera_pose() const {
  const Pose ee = ee_pose_arm_base(state_, arm_);
  Pose mount;
  mount.position = {-0.04, 0.0, 0.05};
  mount.orientation = quaternion_from_euler(0.0, 0.35, 0.0);
  return state_.base * ee * mount * wrist_jitter_;
}

void PickupEnv::attempt_grasp() {
  if (object_.attached) return;
  const Eigen::Vector3d ee = ee_world();
  const Eigen::Vector3d gp = object_.grasp_point();
  if ((ee - gp).norm() > cfg_.grasp_radius) return;
  // ee speed from arm joint rates plus base motion
  const double ee_speed = state_.base_lin_vel.head<2>().norm() +
                          (jacobian(arm_, state_.arm_q).topRows<3>() * state_.arm_dq).norm();
  if (ee_speed > cfg_.grasp_max_speed) return;
  object_.attached = true;
  const Pose ee_pose_world = state_.base * ee_pose_arm_base(state_, arm_);
  grasp_rel_ = ee_pose_world.inverse() * object_.pose;
}

void PickupEnv::release_object() {
  if (!object_.attached) return;
  object_.attached = false;
  const Eigen::Vector3d p = object_.pose.position;
  const bool over_table = table_top_ > 0.02 &&
                          std::abs(p.x() - table_center_.x()) < cfg_.table_extent &&
                          std::abs(p.y() - table_center_.y()) < cfg_.table_extent;
  const double floor_z = over_table ? table_top_ : 0.0;
  object_.pose.position.z() = floor_z + object_.half_height();
}

void PickupEnv::run_low_ticks(const HighAction& applied, int ticks) {
  const Eigen::VectorXd z = params_.normalized(cfg_.randomization);
  for (int t = 0; t < ticks; ++t) {
    Eigen::VectorXd leg_targets;
    if (low_policy_) {
      const Eigen::VectorXd obs = assemble_obs_low(
          state_, prev_low_action_, z, timing_reference(cfg_.gait, time_), held_command_);
      const Eigen::VectorXd action = low_policy_(obs);
      leg_targets = default_leg_posture() + 0.25 * action;
      prev_low_action_ = action;
    } else {
      const double speed = std::abs(held_command_.v_lin) + 0.3 * std::abs(held_command_.yaw_rate);
      leg_targets = gait_reference_legs(cfg_.gait, time_, cfg_.surrogate, 0.06, speed);
    }

    LowStepInput in;
    in.leg_targets = leg_targets;
    in.ee_target_base = invariant_cmd_to_base(state_.base, cfg_.invariant_origin_height,
                                              ee_cmd_.position, euler_from_quaternion(ee_cmd_.orientation));
    in.v_lin_cmd = held_command_.v_lin;
    in.yaw_rate_cmd = held_command_.yaw_rate;

    state_ = step_low(state_, in, arm_, cfg_.surrogate, params_, cfg_.gait, time_, rng_);
    time_ += cfg_.surrogate.dt;

    // crude table collision: base driving into the table counts
    if (table_top_ > 0.02) {
      const Eigen::Vector3d d = state_.base.position - table_center_;
      if (std::abs(d.x()) < cfg_.table_extent + 0.25 && std::abs(d.y()) < cfg_.table_extent + 0.25 &&
          state_.base.position.z() < table_top_ + 0.05)
        state_.collision_count = 1;
    }

    state_.gripper = applied.gripper_close ? 0.0 : 1.0;
    if (applied.gripper_close) attempt_grasp();
    if (!applied.gripper_close && object_.attached && open_streak_ >= cfg_.release_delay_steps)
      release_object();
    if (object_.attached) {
      const Pose ee_pose_world = state_.base * ee_pose_arm_base(state_, arm_);
      object_.pose = ee_pose_world * grasp_rel_;
    }
  }
}

HighStepResult PickupEnv::step(const HighAction& emitted) {
  HighStepResult out;
  emitted_log_.push_back(emitted.vector());

  HighAction applied = emitted;
  if (cfg_.action_delay) {
    applied = pending_ ? *pending_ : HighAction{};
    pending_ = emitted;
  }
  applied_log_.push_back(applied.vector());
  out.applied = applied;

  const bool was_attached = object_.attached;
  const bool rising_close = applied.gripper_close && !prev_applied_close_;
  open_streak_ = applied.gripper_close ? 0 : open_streak_ + 1;

  // held command update; tanh keeps the map smooth in the raw action, so
  // mean shifts stay visible to the policy gradient at any noise scale
  Eigen::Vector3d dp, dr;
  for (int i = 0; i < 3; ++i) {
    dp[i] = cfg_.pos_step * std::tanh(applied.dpose[i]);
    dr[i] = cfg_.orn_step * std::tanh(applied.dpose[3 + i]);
  }
  ee_cmd_.position += dp;
  for (int i = 0; i < 3; ++i)
    ee_cmd_.position[i] = std::clamp(ee_cmd_.position[i], cfg_.ee_min[i], cfg_.ee_max[i]);
  {
    const Eigen::Vector3d rel = ee_cmd_.position - cfg_.ee_ball_center;
    if (rel.norm() > cfg_.ee_ball_radius)
      ee_cmd_.position = cfg_.ee_ball_center + cfg_.ee_ball_radius * rel.normalized();
  }
  ee_cmd_.orientation =
      (ee_cmd_.orientation * quaternion_from_euler(dr.x(), dr.y(), dr.z())).normalized();

  held_command_.p_cmd = ee_cmd_.position;
  held_command_.o_cmd = euler_from_quaternion(ee_cmd_.orientation);
  held_command_.v_lin = cfg_.v_limit * std::tanh(applied.velocity[0]);
  held_command_.yaw_rate = cfg_.yaw_limit * std::tanh(applied.velocity[1]);
  if (cfg_.forcing_stop) {
    if (applied.gripper_close)
      stop_latch_ = cfg_.stop_latch_steps + 1;
    else if (stop_latch_ > 0)
      --stop_latch_;
    if (stop_latch_ > 0) {
      held_command_.v_lin = 0.0;
      held_command_.yaw_rate = 0.0;
    }
  }
  v_cmd_log_.push_back(held_command_.v_lin);
  gripper_cmd_log_.push_back(applied.gripper_close ? 1 : 0);

  run_low_ticks(applied, params_.calls_per_high);
  ++high_steps_;

  // task bookkeeping
  const double dist = (ee_world() - object_.grasp_point()).norm();
  const double obj_z = object_.pose.position.z();
  const bool completed =
      object_.attached && obj_z - object_.surface_height > cfg_.success_lift;
  episode_ = stage_transition(episode_, dist, obj_z, completed);

  out.grasp_attempted = rising_close && !was_attached;
  out.grasped = object_.attached;
  // a failed trial: the object was held and got dropped short of success
  const bool dropped = was_attached && !object_.attached && !episode_.success;
  if (dropped) {
    ++teleport_draws_;
    const TeleportResult tr =
        teleport_object(rng_, cfg_.teleport_prob, object_.pose.position, 0.5 * cfg_.table_extent);
    if (tr.moved) {
      ++teleport_moves_;
      Eigen::Vector3d p = tr.position;
      p.x() = std::clamp(p.x(), table_center_.x() - cfg_.table_extent,
                         table_center_.x() + cfg_.table_extent);
      p.y() = std::clamp(p.y(), table_center_.y() - cfg_.table_extent,
                         table_center_.y() + cfg_.table_extent);
      place_object(p);
      out.teleported = true;
    }
  }

  if (status_ == PickupStatus::ongoing)
    status_ = pickup_status(object_, object_.surface_height, object_.attached, high_steps_,
                            cfg_.max_high_steps, cfg_.success_lift, cfg_.fall_margin);
  out.status = status_;
  out.low_command = held_command_;

  // reward
  HighRewardInputs ri;
  ri.gripper_obj_distance = dist;
  ri.object_height = obj_z;
  ri.arm_joint_velocity = state_.arm_dq;
  ri.prev_arm_joint_velocity = prev_arm_dq_;
  ri.action = emitted.vector();
  ri.prev_action = prev_emitted_vec_;
  ri.command_lin_vel = held_command_.v_lin;
  const Eigen::Vector3d obj_p = object_.pose.position;
  ri.dir_body_to_obj = obj_p - state_.base.position;
  ri.dir_ee_to_obj = obj_p - ee_world();
  const double yaw = state_.base.euler().z();
  ri.dir_base_heading = {std::cos(yaw), std::sin(yaw), 0.0};
  ri.obj_position = obj_p;
  ri.base_position = state_.base.position;
  out.breakdown = high_level_reward(episode_, ri, cfg_.high_reward);
  out.reward = out.breakdown.total;

  prev_arm_dq_ = state_.arm_dq;
  prev_emitted_vec_ = emitted.vector();
  prev_applied_vec_ = applied.vector();
  prev_applied_close_ = applied.gripper_close;

  if (cfg_.vision) update_vision();
  return out;
}

Eigen::VectorXd PickupEnv::privileged_obs() const {
  return assemble_obs_privileged(state_, object_, shape_latent_, prev_emitted_vec_, arm_);
}

void PickupEnv::update_vision() {
  const Scene scene = render_scene();
  CameraIntrinsics intr;
  intr.width = cfg_.image_size;
  intr.height = cfg_.image_size;
  intr.fov_h = cfg_.cam_fov;
  intr.fov_v = cfg_.cam_fov;
  intr.far_clip = cfg_.cam_far;

  DepthFrame head = render(scene, head_camera_pose(), intr);
  head.timestamp = time_;
  DepthFrame wrist = render(scene, wrist_camera_pose(), intr);
  wrist.timestamp = time_;
  head_line_->push(std::move(head));
  wrist_line_->push(std::move(wrist));

  auto push_processed = [this](std::deque<Image>& hist, const DepthFrame& f) {
    Image depth = preprocess(f, 0.2, cfg_.cam_far);
    depth = augment(depth, rng_, cfg_.augment);
    Image mask(f.depth.width, f.depth.height);
    for (size_t i = 0; i < f.mask.size(); ++i) mask.pixels[i] = f.mask[i] ? 1.0 : 0.0;
    hist.push_back(std::move(depth));
    hist.push_back(std::move(mask));
    while (static_cast<int>(hist.size()) > 2 * cfg_.frame_stack_k) hist.pop_front();
  };
  push_processed(head_hist_, head_line_->current());
  push_processed(wrist_hist_, wrist_line_->current());
}

StudentObs PickupEnv::student_obs() {
  if (!cfg_.vision) throw std::runtime_error("student_obs: vision disabled in config");
  StudentObs obs;
  obs.height = cfg_.image_size;
  obs.width = cfg_.image_size;
  obs.channels = 4 * cfg_.frame_stack_k;
  obs.image.resize(static_cast<size_t>(obs.channels * obs.height * obs.width));

  const int pairs = cfg_.frame_stack_k;
  const int hw = obs.height * obs.width;
  const int have = static_cast<int>(head_hist_.size()) / 2;
  for (int fidx = 0; fidx < pairs; ++fidx) {
    const int src = std::max(0, have - pairs + fidx);
    const Image& hd = head_hist_[static_cast<size_t>(2 * src)];
    const Image& hm = head_hist_[static_cast<size_t>(2 * src + 1)];
    const Image& wd = wrist_hist_[static_cast<size_t>(2 * src)];
    const Image& wm = wrist_hist_[static_cast<size_t>(2 * src + 1)];
    const Image* imgs[4] = {&hd, &hm, &wd, &wm};
    for (int ch = 0; ch < 4; ++ch)
      std::copy(imgs[ch]->pixels.begin(), imgs[ch]->pixels.end(),
                obs.image.begin() + static_cast<long>(4 * fidx + ch) * hw);
  }

  // s_proprio(43) + a_prev(9)
  obs.aux.resize(52);
  int i = 0;
  obs.aux.segment<12>(i) = state_.leg_q;
  obs.aux.segment<6>(i + 12) = state_.arm_q;
  obs.aux[i + 18] = state_.gripper;
  i += 19;
  obs.aux.segment<12>(i) = state_.leg_dq;
  obs.aux.segment<6>(i + 12) = state_.arm_dq;
  i += 18;
  const Pose ee = ee_pose_arm_base(state_, arm_);
  obs.aux.segment<3>(i) = ee.position;
  obs.aux.segment<3>(i + 3) = ee.euler();
  i += 6;
  obs.aux.segment<9>(i) = prev_emitted_vec_;
  return obs;
}

}  // namespace locoman
