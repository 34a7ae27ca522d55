#pragma once

#include <deque>
#include <functional>
#include <optional>

#include "locoman/sim_env.hpp"

namespace locoman {

// ---------------------------------------------------------------------------
// Goal-tracking environment (low-level policy training and the IK benchmark)

struct GoalTrackConfig {
  SurrogateParams surrogate;
  RandomizationProfile randomization;
  GaitSchedule gait = GaitSchedule::trot(2.0, 0.5);
  LowRewardConfig reward;
  GoalRanges goal_ranges;
  BodyGeometry body_geometry;
  double episode_seconds = 8.0;
  double resample_period = 2.0;  // T_traj
  double invariant_origin_height = 0.55;
  std::array<double, 2> v_cmd_range = {-0.6, 0.6};
  std::array<double, 2> yaw_cmd_range = {-1.0, 1.0};
  std::optional<double> fixed_v_cmd;  // eval protocol pins the command
  double action_scale = 0.25;
  int obs_history = 25;
};

/// Track sampled body-velocity commands and end-effector goal trajectories;
/// reward is the 12-term low-level table.
class GoalTrackEnv {
 public:
  GoalTrackEnv(GoalTrackConfig cfg, uint64_t seed);

  void reset();

  struct StepOut {
    double reward = 0.0;
    RewardBreakdown breakdown;
    bool done = false;
    double tracking_kernel_value = 0.0;  // phi(v* - v)
    double ee_pos_error = 0.0;           // meters to the commanded goal
  };
  StepOut step(const Eigen::VectorXd& action12);

  Eigen::VectorXd obs_no_z() const;  // 90-dim with the extrinsics slot zeroed
  Eigen::VectorXd z_env() const { return params_.normalized(cfg_.randomization); }
  /// [feat(70), history] matrix for the adaptation module (obs minus z slot).
  Eigen::MatrixXd obs_history() const;
  int history_len() const { return cfg_.obs_history; }

  const RobotState& robot() const { return state_; }
  const EpisodeParams& params() const { return params_; }
  const LowCommand& command() const { return command_; }
  double time() const { return time_; }
  const KinematicChain& arm() const { return arm_; }

 private:
  void resample_goal();
  void push_history();

  GoalTrackConfig cfg_;
  Rng rng_;
  KinematicChain arm_;
  RobotState state_;
  EpisodeParams params_;
  LowCommand command_;
  GoalTrajectory traj_;
  double traj_t_ = 0.0;
  double time_ = 0.0;
  Eigen::VectorXd prev_action_ = Eigen::VectorXd::Zero(12);
  std::deque<Eigen::VectorXd> history_;
};

// ---------------------------------------------------------------------------
// Pickup task environment

struct PickupEnvConfig {
  SurrogateParams surrogate;
  RandomizationProfile randomization;
  GaitSchedule gait = GaitSchedule::trot(2.0, 0.5);
  HighRewardConfig high_reward;
  int max_high_steps = 150;
  double success_lift = 0.1;
  double fall_margin = 0.05;
  double grasp_radius = 0.04;
  double grasp_max_speed = 0.2;
  /// Consecutive open-commanded high steps before an attached object is
  /// released (finger travel time at the high-level rate).
  int release_delay_steps = 3;
  /// The forced stop persists this many steps past the close command
  /// (gripper actuation time keeps the base planted).
  int stop_latch_steps = 2;
  double teleport_prob = 0.10;
  PrimitiveKind object_kind = PrimitiveKind::sphere;
  Eigen::Vector3d object_dims = {0.035, 0.035, 0.035};
  std::optional<double> fixed_table_height;  // otherwise the randomization draw
  double table_extent = 0.35;                // half size of the square table top
  double start_distance = 1.0;
  double start_jitter = 0.08;
  double object_lateral_jitter = 0.12;
  /// Reverse-curriculum spawn probabilities (evaluation keeps both at 0):
  /// near_start_prob spawns next to the table with the hand command primed at
  /// the object; grasped_start_prob additionally starts with the object in
  /// the closed gripper.
  double near_start_prob = 0.0;
  double grasped_start_prob = 0.0;
  int shape_latent_dim = 64;
  bool action_delay = true;
  bool forcing_stop = true;
  double pos_step = 0.04;  // meters per unit action
  double orn_step = 0.10;  // radians per unit action
  double v_limit = 0.6;    // command clip (the curriculum tightens this)
  double yaw_limit = 1.0;
  double invariant_origin_height = 0.55;
  Eigen::Vector3d ee_min = {0.12, -0.55, -0.55};
  Eigen::Vector3d ee_max = {0.80, 0.55, 0.40};
  // keep the command inside the arm's trackable set so the achieved hand
  // pose (which the policy observes) stays glued to it
  Eigen::Vector3d ee_ball_center = {0.0, 0.0, 0.03};
  double ee_ball_radius = 0.74;

  // vision (student) observations
  bool vision = false;
  int image_size = 32;
  double cam_fov = 1.4;
  double cam_far = 3.0;
  int frame_stack_k = 4;
  AugmentConfig augment;
  std::array<double, 2> cam_jitter_translation = {-0.01, 0.01};
  std::array<double, 2> cam_jitter_rotation = {-0.03, 0.03};
};

struct HighStepResult {
  double reward = 0.0;
  RewardBreakdown breakdown;
  PickupStatus status = PickupStatus::ongoing;
  HighAction applied;
  LowCommand low_command;  // after clipping and forcing stop
  bool teleported = false;
  bool grasp_attempted = false;
  bool grasped = false;
};

struct StudentObs {
  int channels = 0, height = 0, width = 0;
  std::vector<double> image;  // [C][H][W], frame-major, per frame
                              // [head depth, head mask, wrist depth, wrist mask]
  Eigen::VectorXd aux;        // s_proprio(43) + a_prev(9)
  double& at(int c, int r, int col) {
    return image[static_cast<size_t>((c * height + r) * width + col)];
  }
};

/// Episode logic for the pickup task on the dynamics surrogate: the
/// high-level action updates the held low command, several low-level ticks
/// execute it, grasping is kinematic.
class PickupEnv {
 public:
  using LowPolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& obs_low)>;

  PickupEnv(PickupEnvConfig cfg, uint64_t seed);

  /// Empty function selects the built-in gait-reference legs.
  void set_low_policy(LowPolicyFn fn) { low_policy_ = std::move(fn); }

  void reset();
  HighStepResult step(const HighAction& emitted);

  Eigen::VectorXd privileged_obs() const;
  int privileged_obs_dim() const { return cfg_.shape_latent_dim + 61; }
  StudentObs student_obs();
  int student_channels() const { return 4 * cfg_.frame_stack_k; }

  const RobotState& robot() const { return state_; }
  const SceneObject& object() const { return object_; }
  const EpisodeParams& params() const { return params_; }
  const EpisodeState& episode() const { return episode_; }
  PickupStatus status() const { return status_; }
  double time() const { return time_; }
  int high_steps() const { return high_steps_; }
  const KinematicChain& arm() const { return arm_; }
  const PickupEnvConfig& config() const { return cfg_; }
  Eigen::Vector3d ee_world() const;

  // curriculum hooks
  void set_v_limit(double v) { cfg_.v_limit = v; }
  void set_cmd_term_active(bool active) { cfg_.high_reward.cmd_term_active = active; }
  void set_near_start_prob(double near, double grasped) {
    cfg_.near_start_prob = near;
    cfg_.grasped_start_prob = grasped;
  }
  void set_grasp_radius(double r) { cfg_.grasp_radius = r; }
  void set_near_standoff(double lo, double hi) {
    near_standoff_lo_ = lo;
    near_standoff_hi_ = hi;
  }
  bool was_near_start() const { return near_start_; }

  // logged streams (tests + acceptance)
  const std::vector<Eigen::Matrix<double, 9, 1>>& emitted_log() const { return emitted_log_; }
  const std::vector<Eigen::Matrix<double, 9, 1>>& applied_log() const { return applied_log_; }
  const std::vector<double>& v_cmd_log() const { return v_cmd_log_; }
  const std::vector<uint8_t>& gripper_cmd_log() const { return gripper_cmd_log_; }
  long teleport_draws() const { return teleport_draws_; }
  long teleport_moves() const { return teleport_moves_; }

  /// Scene as seen by the depth cameras (ground, table, object).
  Scene render_scene() const;
  Pose head_camera_pose() const;
  Pose wrist_camera_pose() const;

 private:
  void place_object(const Eigen::Vector3d& xy_center);
  void run_low_ticks(const HighAction& applied, int ticks);
  void attempt_grasp();
  void release_object();
  void update_vision();

  PickupEnvConfig cfg_;
  Rng rng_;
  KinematicChain arm_;
  RobotState state_;
  SceneObject object_;
  EpisodeParams params_;
  EpisodeState episode_;
  PickupStatus status_ = PickupStatus::ongoing;
  LowPolicyFn low_policy_;

  LowCommand held_command_;
  Pose ee_cmd_;  // invariant frame command (position + orientation)
  std::optional<HighAction> pending_;  // one-step action delay buffer
  HighAction last_applied_;
  Eigen::VectorXd prev_low_action_ = Eigen::VectorXd::Zero(12);
  Eigen::VectorXd prev_arm_dq_ = Eigen::VectorXd::Zero(6);
  Eigen::Matrix<double, 9, 1> prev_emitted_vec_ = Eigen::Matrix<double, 9, 1>::Zero();
  Eigen::Matrix<double, 9, 1> prev_applied_vec_ = Eigen::Matrix<double, 9, 1>::Zero();
  Eigen::VectorXd shape_latent_;
  Pose grasp_rel_;  // object pose in the ee frame while attached
  double time_ = 0.0;
  int high_steps_ = 0;
  double table_top_ = 0.0;
  Eigen::Vector3d table_center_ = Eigen::Vector3d::Zero();
  bool prev_applied_close_ = false;
  bool near_start_ = false;
  int open_streak_ = 0;
  int stop_latch_ = 0;
  double near_standoff_lo_ = 0.25;
  double near_standoff_hi_ = 0.70;

  // vision
  Pose head_jitter_, wrist_jitter_;
  std::optional<FrameDelayLine> head_line_, wrist_line_;
  std::deque<Image> head_hist_, wrist_hist_;

  std::vector<Eigen::Matrix<double, 9, 1>> emitted_log_, applied_log_;
  std::vector<double> v_cmd_log_;
  std::vector<uint8_t> gripper_cmd_log_;
  long teleport_draws_ = 0;
  long teleport_moves_ = 0;
};

}  // namespace locoman
