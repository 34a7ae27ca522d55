#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locoman/pickup_env.hpp"

using namespace locoman;

namespace {

RobotState standing_state(const SurrogateParams& p) {
  RobotState s;
  s.leg_q = default_leg_posture();
  double ext = 0.0;
  for (int f = 0; f < 4; ++f) ext += leg_extension(s.leg_q[3 * f + 1], s.leg_q[3 * f + 2], p);
  s.base.position = {0.0, 0.0, ext / 4.0};
  s.arm_q = Eigen::VectorXd::Zero(6);
  s.arm_q << 0.0, 0.5, 1.0, 0.0, 0.5, 0.0;
  return s;
}

SurrogateParams quiet_params() {
  SurrogateParams p;
  p.gait_coupling = false;
  p.vel_noise = 0.0;
  return p;
}

}  // namespace

TEST_CASE("equilibrium: zero commands and matching targets leave the state put") {
  const SurrogateParams p = quiet_params();
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  LowStepInput in;
  in.leg_targets = s.leg_q;
  in.ee_target_base = ee_pose_arm_base(s, arm);
  Rng rng(1);
  const EpisodeParams ep;
  const GaitSchedule gait = GaitSchedule::trot();
  for (int t = 0; t < 50; ++t) s = step_low(s, in, arm, p, ep, gait, t * p.dt, rng);
  CHECK((s.leg_q - default_leg_posture()).norm() < 1e-9);
  CHECK(s.base_lin_vel.norm() < 1e-9);
  CHECK(std::abs(s.base.position.x()) < 1e-9);
}

TEST_CASE("first-order velocity tracking matches the closed form") {
  SurrogateParams p = quiet_params();
  p.base_gain = 50.0;  // alpha = gain*dt = 1: unit tracking gain
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  LowStepInput in;
  in.leg_targets = s.leg_q;
  in.ee_target_base = ee_pose_arm_base(s, arm);
  in.v_lin_cmd = 0.5;
  Rng rng(1);
  const EpisodeParams ep;
  const GaitSchedule gait = GaitSchedule::trot();

  // Oracle: discrete first-order lag x_N = dt * sum v_k, v_k = v*(1-(1-a)^k).
  const double alpha = std::min(1.0, p.base_gain * p.dt);
  double xe = 0.0, v = 0.0;
  for (int k = 0; k < 100; ++k) {
    v += alpha * (0.5 - v);
    xe += v * p.dt;
  }
  for (int t = 0; t < 100; ++t) s = step_low(s, in, arm, p, ep, gait, t * p.dt, rng);
  CHECK(s.base.position.x() == doctest::Approx(xe).epsilon(1e-9));
  CHECK(xe == doctest::Approx(1.0).epsilon(0.01));

  // lower gain: same oracle still matches
  SurrogateParams p2 = quiet_params();
  p2.base_gain = 3.0;
  RobotState s2 = standing_state(p2);
  const double a2 = std::min(1.0, p2.base_gain * p2.dt);
  double xe2 = 0.0, v2 = 0.0;
  for (int k = 0; k < 100; ++k) {
    v2 += a2 * (0.5 - v2);
    xe2 += v2 * p2.dt;
  }
  for (int t = 0; t < 100; ++t) s2 = step_low(s2, in, arm, p2, ep, gait, t * p2.dt, rng);
  CHECK(s2.base.position.x() == doctest::Approx(xe2).epsilon(1e-9));
}

TEST_CASE("arm converges to an in-workspace target within a second") {
  const SurrogateParams p = quiet_params();
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  LowStepInput in;
  in.leg_targets = s.leg_q;
  // a reachable pose in front of the robot
  JointVector q_goal(6);
  q_goal << 0.3, 0.7, 0.9, 0.2, 0.5, -0.2;
  in.ee_target_base = forward_kinematics(arm, q_goal);
  Rng rng(3);
  const EpisodeParams ep;
  const GaitSchedule gait = GaitSchedule::trot();
  for (int t = 0; t < 50; ++t) s = step_low(s, in, arm, p, ep, gait, t * p.dt, rng);
  const Pose reached = ee_pose_arm_base(s, arm);
  CHECK((reached.position - in.ee_target_base.position).norm() < 0.005);
}

TEST_CASE("step_low faults on non-finite targets") {
  const SurrogateParams p = quiet_params();
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  LowStepInput in;
  in.leg_targets = s.leg_q;
  in.leg_targets[3] = std::nan("");
  in.ee_target_base = ee_pose_arm_base(s, arm);
  Rng rng(1);
  CHECK_THROWS_AS(step_low(s, in, arm, p, EpisodeParams{}, GaitSchedule::trot(), 0.0, rng),
                  std::runtime_error);
}

TEST_CASE("pd energy decays monotonically with zero commands") {
  const SurrogateParams p = quiet_params();
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  // push the legs off their targets with some velocity
  Rng rng(7);
  for (int i = 0; i < 12; ++i) {
    s.leg_q[i] += rng.uniform(-0.3, 0.3);
    s.leg_dq[i] = rng.uniform(-1.0, 1.0);
  }
  LowStepInput in;
  in.leg_targets = default_leg_posture();
  in.ee_target_base = ee_pose_arm_base(s, arm);
  const EpisodeParams ep;
  const GaitSchedule gait = GaitSchedule::trot();

  auto energy = [&](const RobotState& st) {
    double e = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double dq = st.leg_q[i] - in.leg_targets[i];
      e += 0.5 * p.leg_kp * dq * dq + 0.5 * st.leg_dq[i] * st.leg_dq[i];
    }
    return e;
  };
  double prev = energy(s);
  for (int t = 0; t < 200; ++t) {
    s = step_low(s, in, arm, p, ep, gait, t * p.dt, rng);
    const double e = energy(s);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("assemble_obs_low layout: 90 dims, documented slot order") {
  const SurrogateParams p = quiet_params();
  RobotState s = standing_state(p);
  s.base_ang_vel = {0.1, -0.2, 0.3};
  s.base.orientation = quaternion_from_euler(0.05, -0.04, 0.8);
  s.arm_q << 1, 2, 3, 4, 5, 6;
  s.arm_dq << -1, -2, -3, -4, -5, -6;
  for (int i = 0; i < 12; ++i) {
    s.leg_q[i] = 10 + i;
    s.leg_dq[i] = 30 + i;
  }
  s.foot_contact = {true, false, true, false};
  Eigen::VectorXd prev = Eigen::VectorXd::LinSpaced(12, 50, 61);
  Eigen::VectorXd z = Eigen::VectorXd::LinSpaced(20, 70, 89);
  Eigen::Matrix<double, 5, 1> timing;
  timing << 1, 2, 3, 4, 5;
  LowCommand cmd;
  cmd.p_cmd = {0.5, 0.1, -0.2};
  cmd.o_cmd = {0.01, 0.02, 0.03};
  cmd.v_lin = 0.4;
  cmd.yaw_rate = -0.6;

  const Eigen::VectorXd o = assemble_obs_low(s, prev, z, timing, cmd);
  REQUIRE(o.size() == 90);
  CHECK(o[0] == doctest::Approx(0.05));   // roll
  CHECK(o[1] == doctest::Approx(-0.04));  // pitch
  CHECK(o[2] == doctest::Approx(0.1));
  CHECK(o[ObsLowLayout::kArm] == 1);
  CHECK(o[ObsLowLayout::kArm + 11] == -6);
  CHECK(o[ObsLowLayout::kLeg] == 10);
  CHECK(o[ObsLowLayout::kLeg + 24] == 1.0);  // contacts
  CHECK(o[ObsLowLayout::kLeg + 25] == 0.0);
  CHECK(o[ObsLowLayout::kPrevAction] == 50);
  CHECK(o[ObsLowLayout::kExtrinsics] == 70);
  CHECK(o[ObsLowLayout::kTiming] == 1);
  CHECK(o[ObsLowLayout::kCommand] == doctest::Approx(0.5));
  CHECK(o[ObsLowLayout::kCommand + 6] == doctest::Approx(0.4));
  CHECK(o[89] == doctest::Approx(-0.6));

  // zero state keeps only timing and command slots nonzero
  RobotState zero;
  const Eigen::VectorXd oz = assemble_obs_low(zero, Eigen::VectorXd::Zero(12),
                                              Eigen::VectorXd::Zero(20), timing, cmd);
  CHECK(oz.head(77).cwiseAbs().maxCoeff() <
        1e-12 + 4.0);  // contacts default true => leg contact slots are 1
  CHECK(oz.segment(ObsLowLayout::kTiming, 5).isApprox(timing));

  CHECK_THROWS_AS(assemble_obs_low(s, Eigen::VectorXd::Zero(11), z, timing, cmd),
                  std::invalid_argument);
  CHECK_THROWS_AS(assemble_obs_low(s, prev, Eigen::VectorXd::Zero(19), timing, cmd),
                  std::invalid_argument);
}

TEST_CASE("privileged observation: length, local object pose, translation invariance") {
  const SurrogateParams p = quiet_params();
  const KinematicChain arm = KinematicChain::default_arm();
  RobotState s = standing_state(p);
  SceneObject obj;
  obj.pose.position = {0.8, 0.1, 0.35};
  const Eigen::VectorXd latent = shape_feature(obj, 64);
  Eigen::Matrix<double, 9, 1> prev = Eigen::Matrix<double, 9, 1>::Zero();

  const Eigen::VectorXd o = assemble_obs_privileged(s, obj, latent, prev, arm);
  CHECK(o.size() == 125);  // 64 + 61

  // object at the arm base origin: zero local position
  SceneObject at_base = obj;
  at_base.pose.position = (s.base * arm.mount()).position;
  const Eigen::VectorXd o2 = assemble_obs_privileged(s, at_base, latent, prev, arm);
  CHECK(o2.segment<3>(64).norm() < 1e-12);

  // translating robot and object together changes nothing
  RobotState s3 = s;
  SceneObject obj3 = obj;
  const Eigen::Vector3d shift(3.0, -2.0, 0.0);
  s3.base.position += shift;
  obj3.pose.position += shift;
  const Eigen::VectorXd o3 = assemble_obs_privileged(s3, obj3, latent, prev, arm);
  CHECK((o3 - o).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pickup status thresholds") {
  SceneObject obj;
  obj.surface_height = 0.3;
  obj.pose.position = {0, 0, 0.41};
  CHECK(pickup_status(obj, 0.3, true, 10) == PickupStatus::success);   // lifted 0.11
  CHECK(pickup_status(obj, 0.3, false, 10) == PickupStatus::ongoing);  // not grasped
  obj.pose.position.z() = 0.39;
  CHECK(pickup_status(obj, 0.3, true, 10) == PickupStatus::ongoing);  // only 0.09
  obj.pose.position.z() = 0.2;
  CHECK(pickup_status(obj, 0.3, false, 10) == PickupStatus::fail);  // fell off
  obj.pose.position.z() = 0.35;
  CHECK(pickup_status(obj, 0.3, false, 150) == PickupStatus::fail);  // budget

  // floor-level surface: success still needs the 0.1 lift
  SceneObject floor_obj;
  floor_obj.surface_height = 0.0;
  floor_obj.pose.position = {0, 0, 0.09};
  CHECK(pickup_status(floor_obj, 0.0, true, 10) == PickupStatus::ongoing);
  floor_obj.pose.position.z() = 0.11;
  CHECK(pickup_status(floor_obj, 0.0, true, 10) == PickupStatus::success);
}

TEST_CASE("randomization: degenerate ranges, call counts, histogram") {
  RandomizationProfile prof;
  prof.friction = {0.7, 0.7};
  prof.base_mass_scale = {1.0, 1.0};
  prof.arm_mass_scale = {1.0, 1.0};
  prof.com_offset = {0.0, 0.0};
  prof.motor_strength = {1.0, 1.0};
  prof.arm_kp = {80, 80};
  prof.arm_kd = {2, 2};
  prof.calls_per_high = {7, 7};
  prof.camera_latency = {1, 1};
  prof.table_height = {0.3, 0.3};
  Rng rng(5);
  const EpisodeParams a = apply_randomization(prof, rng);
  const EpisodeParams b = apply_randomization(prof, rng);
  CHECK(a.friction == b.friction);
  CHECK(a.calls_per_high == 7);
  CHECK(a.table_height == 0.3);

  RandomizationProfile def;
  Rng rng2(9);
  std::array<int, 3> counts = {0, 0, 0};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const EpisodeParams p = apply_randomization(def, rng2);
    REQUIRE(p.calls_per_high >= 6);
    REQUIRE(p.calls_per_high <= 8);
    ++counts[static_cast<size_t>(p.calls_per_high - 6)];
  }
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 1.0 / 3) < 0.02);
}

TEST_CASE("extrinsics vector is 20-dim, in range, zero-padded") {
  RandomizationProfile prof;
  Rng rng(3);
  const EpisodeParams p = apply_randomization(prof, rng);
  const Eigen::VectorXd z = p.normalized(prof);
  REQUIRE(z.size() == 20);
  for (int i = 0; i < 12; ++i) {
    CHECK(z[i] >= -1.0 - 1e-12);
    CHECK(z[i] <= 1.0 + 1e-12);
  }
  for (int i = 12; i < 20; ++i) CHECK(z[i] == 0.0);
}

TEST_CASE("shape feature: deterministic, discriminative, position invariant") {
  SceneObject sphere;
  sphere.kind = PrimitiveKind::sphere;
  sphere.dimensions = {0.5, 0, 0};
  SceneObject cube;
  cube.kind = PrimitiveKind::box;
  cube.dimensions = {0.5, 0.5, 0.5};

  const Eigen::VectorXd f1 = shape_feature(sphere, 16);
  const Eigen::VectorXd f2 = shape_feature(sphere, 16);
  CHECK((f1 - f2).norm() == 0.0);

  const Eigen::VectorXd fc = shape_feature(cube, 16);
  CHECK((f1 - fc).norm() > 1e-6);

  SceneObject moved = sphere;
  moved.pose.position = {3, 4, 5};
  CHECK((shape_feature(moved, 16) - f1).norm() == 0.0);

  CHECK_THROWS_AS(shape_feature(sphere, 4), std::invalid_argument);
}

TEST_CASE("teleport: degenerate probabilities and empirical rate") {
  Rng rng(11);
  const Eigen::Vector3d at(1, 2, 0.3);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(teleport_object(rng, 0.0, at).moved);
    CHECK(teleport_object(rng, 1.0, at).moved);
  }
  long moves = 0;
  const long n = 100000;
  for (long i = 0; i < n; ++i)
    if (teleport_object(rng, 0.10, at).moved) ++moves;
  CHECK(std::abs(moves / static_cast<double>(n) - 0.10) < 0.005);
}

TEST_CASE("pickup env: determinism with identical seeds") {
  PickupEnvConfig cfg;
  cfg.fixed_table_height = 0.3;
  auto run = [&cfg]() {
    PickupEnv env(cfg, 42);
    std::vector<double> sig;
    Rng arng(7);
    for (int t = 0; t < 30; ++t) {
      HighAction a;
      for (int i = 0; i < 6; ++i) a.dpose[i] = arng.uniform(-1, 1);
      a.velocity = {arng.uniform(-0.6, 0.6), arng.uniform(-1, 1)};
      a.gripper_close = arng.bernoulli(0.2);
      const HighStepResult r = env.step(a);
      sig.push_back(r.reward);
      sig.push_back(env.robot().base.position.x());
      sig.push_back(env.object().pose.position.z());
    }
    return sig;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("pickup env honors action delay and forcing stop") {
  PickupEnvConfig cfg;
  cfg.fixed_table_height = 0.3;
  PickupEnv env(cfg, 1);

  HighAction first;
  first.velocity = {0.5, 0.0};
  first.gripper_close = false;
  const HighStepResult r0 = env.step(first);
  // one-step delay: the very first applied action is the neutral one
  CHECK(r0.applied.vector().norm() == 0.0);

  HighAction second;
  second.velocity = {0.4, 0.0};
  second.gripper_close = true;
  const HighStepResult r1 = env.step(second);
  CHECK(r1.applied.velocity[0] == doctest::Approx(0.5));  // first action, delayed
  CHECK_FALSE(r1.applied.gripper_close);

  const HighStepResult r2 = env.step(HighAction{});
  CHECK(r2.applied.gripper_close);                     // second action arrives
  CHECK(r2.low_command.v_lin == 0.0);                  // forcing stop
  CHECK(r2.low_command.yaw_rate == 0.0);
}

TEST_CASE("scripted walk-reach-lift succeeds on the pickup env") {
  PickupEnvConfig cfg;
  cfg.fixed_table_height = 0.3;
  cfg.action_delay = false;  // simpler scripted control
  cfg.start_distance = 1.0;
  cfg.start_jitter = 0.0;
  cfg.object_lateral_jitter = 0.0;
  PickupEnv env(cfg, 3);

  bool success = false;
  for (int t = 0; t < 150 && !success; ++t) {
    const InvariantFrame frame =
        InvariantFrame::from_base(env.robot().base, cfg.invariant_origin_height);
    const Eigen::Vector3d obj_inv = frame.to_frame(env.object().grasp_point());
    const Eigen::Vector3d ee_inv = frame.to_frame(env.ee_world());
    const double planar_dist = obj_inv.head<2>().norm();

    HighAction a;
    if (!env.object().attached) {
      if (planar_dist > 0.55) {
        a.velocity = {2.0, 0.0};  // raw units; tanh maps into the limits
      } else {
        a.velocity = {0.0, 0.0};
        const Eigen::Vector3d delta = obj_inv - ee_inv;
        a.dpose.head<3>() = 60.0 * delta;  // saturates toward the step size
        a.gripper_close = delta.norm() < 0.03;
      }
    } else {
      a.dpose.head<3>() = Eigen::Vector3d(0, 0, 3.0);
      a.gripper_close = true;
    }
    const HighStepResult r = env.step(a);
    success = r.status == PickupStatus::success;
  }
  CHECK(success);
}

TEST_CASE("goal track env: commands stay in range and reward is finite") {
  GoalTrackConfig cfg;
  GoalTrackEnv env(cfg, 11);
  Rng arng(3);
  for (int t = 0; t < 200; ++t) {
    Eigen::VectorXd a(12);
    for (int i = 0; i < 12; ++i) a[i] = arng.uniform(-1, 1);
    const auto out = env.step(a);
    CHECK(std::isfinite(out.reward));
    CHECK(env.command().p_cmd.norm() <= 0.95 + 1e-9);
    const Eigen::VectorXd obs = env.obs_no_z();
    REQUIRE(obs.size() == 90);
    CHECK(obs.segment(ObsLowLayout::kExtrinsics, 20).cwiseAbs().maxCoeff() == 0.0);
  }
  const Eigen::MatrixXd hist = env.obs_history();
  CHECK(hist.rows() == 70);
  CHECK(hist.cols() == 25);
}

TEST_CASE("gait reference legs track the commanded contact schedule") {
  GoalTrackConfig cfg;
  cfg.fixed_v_cmd = 0.0;
  GoalTrackEnv env(cfg, 21);
  double agree = 0.0;
  int n = 0;
  for (int t = 0; t < 400; ++t) {
    const Eigen::VectorXd ref =
        gait_reference_legs(cfg.gait, env.time(), cfg.surrogate);
    Eigen::VectorXd action = (ref - default_leg_posture()) / cfg.action_scale;
    env.step(action);
    if (t > 100) {  // after the PD transient
      agree += contact_agreement(env.robot(), cfg.gait, env.time());
      ++n;
    }
  }
  CHECK(agree / n > 0.85);
}
