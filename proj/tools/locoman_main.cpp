#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "locoman/config.hpp"
#include "locoman/harness.hpp"
#include "locoman/metrics.hpp"
#include "locoman/trainers.hpp"

using namespace locoman;

namespace {

RandomizationProfile make_randomization(const RunConfig& c) {
  RandomizationProfile r;
  r.friction = {c.real("rand.friction_min"), c.real("rand.friction_max")};
  r.calls_per_high = {static_cast<int>(c.integer("rand.calls_min")),
                      static_cast<int>(c.integer("rand.calls_max"))};
  r.camera_latency = {static_cast<int>(c.integer("rand.latency_min")),
                      static_cast<int>(c.integer("rand.latency_max"))};
  r.table_height = {c.real("rand.table_min"), c.real("rand.table_max")};
  return r;
}

PickupEnvConfig make_env_config(const RunConfig& c) {
  PickupEnvConfig e;
  e.randomization = make_randomization(c);
  e.gait = GaitSchedule::trot(c.real("gait.frequency"), c.real("gait.duty"));
  e.high_reward.positive_progress = c.boolean("rewards.positive_progress");
  e.max_high_steps = static_cast<int>(c.integer("env.max_high_steps"));
  e.grasp_radius = c.real("env.grasp_radius");
  e.teleport_prob = c.real("env.teleport_prob");
  const std::string kind = c.text("env.object");
  if (kind == "sphere")
    e.object_kind = PrimitiveKind::sphere;
  else if (kind == "box")
    e.object_kind = PrimitiveKind::box;
  else if (kind == "cylinder")
    e.object_kind = PrimitiveKind::cylinder;
  else
    throw ConfigError("env.object must be sphere, box or cylinder");
  const double s = c.real("env.object_size");
  e.object_dims = {s, s, s};
  if (c.real("env.table_height") >= 0.0) e.fixed_table_height = c.real("env.table_height");
  e.start_distance = c.real("env.start_distance");
  e.action_delay = c.boolean("env.action_delay");
  e.forcing_stop = c.boolean("env.forcing_stop");
  e.vision = c.boolean("env.vision");
  e.image_size = static_cast<int>(c.integer("env.image_size"));
  e.frame_stack_k = static_cast<int>(c.integer("env.frame_stack"));
  e.shape_latent_dim = static_cast<int>(c.integer("env.shape_latent"));
  e.invariant_origin_height = c.real("goals.origin_height");
  return e;
}

PpoConfig make_ppo_config(const RunConfig& c) {
  PpoConfig p;
  p.lr = c.real("ppo.lr");
  p.clip_eps = c.real("ppo.clip_eps");
  p.gamma = c.real("ppo.gamma");
  p.gae_lambda = c.real("ppo.gae_lambda");
  p.epochs = static_cast<int>(c.integer("ppo.epochs"));
  p.minibatch = static_cast<int>(c.integer("ppo.minibatch"));
  p.rollout_steps = static_cast<int>(c.integer("ppo.rollout_steps"));
  p.num_envs = static_cast<int>(c.integer("ppo.num_envs"));
  p.entropy_coef = c.real("ppo.entropy_coef");
  p.value_coef = c.real("ppo.value_coef");
  p.max_grad_norm = c.real("ppo.max_grad_norm");
  p.initial_std = c.real("ppo.initial_std");
  return p;
}

GoalTrackConfig make_goal_track_config(const RunConfig& c) {
  GoalTrackConfig g;
  g.randomization = make_randomization(c);
  g.gait = GaitSchedule::trot(c.real("gait.frequency"), c.real("gait.duty"));
  g.reward.sigma_cf = c.real("rewards.sigma_cf");
  g.reward.sigma_cv = c.real("rewards.sigma_cv");
  g.reward.target_base_height = c.real("rewards.base_height_target");
  g.resample_period = c.real("goals.t_traj");
  g.invariant_origin_height = c.real("goals.origin_height");
  return g;
}

int cmd_train_low(const RunConfig& c, uint64_t seed, const std::string& out) {
  TrainLowConfig cfg;
  cfg.ppo = make_ppo_config(c);
  cfg.env = make_goal_track_config(c);
  cfg.updates = static_cast<int>(c.integer("train.updates"));
  cfg.phase2_updates = static_cast<int>(c.integer("train.phase2_updates"));
  cfg.lambda_max = c.real("train.lambda_max");
  cfg.rma_mode = c.boolean("train.rma_mode");
  cfg.eval_episodes = static_cast<int>(c.integer("train.eval_episodes"));
  cfg.seed = seed;
  cfg.out_dir = out;
  const TrainLowResult r = train_low(cfg);
  std::printf("train-low: tracking %.3f -> %.3f, final reward %.3f, checkpoint %s\n",
              r.tracking_before, r.tracking_after, r.mean_reward_final,
              r.checkpoint_path.c_str());
  return 0;
}

int cmd_train_teacher(const RunConfig& c, uint64_t seed, const std::string& out,
                      const std::string& low_ckpt) {
  TrainTeacherConfig cfg;
  cfg.ppo = make_ppo_config(c);
  cfg.env = make_env_config(c);
  cfg.updates = static_cast<int>(c.integer("train.updates"));
  cfg.clip_start = c.real("train.clip_start");
  cfg.clip_end = c.real("train.clip_end");
  cfg.cmd_activate_success = c.real("train.cmd_activate");
  cfg.near_start_init = c.real("train.near_start_init");
  cfg.near_start_gone = c.real("train.near_start_gone");
  cfg.eval_episodes = static_cast<int>(c.integer("train.eval_episodes"));
  cfg.seed = seed;
  cfg.out_dir = out;
  cfg.low_checkpoint = low_ckpt;
  const TrainTeacherResult r = train_teacher(cfg);
  std::printf("train-teacher: success %.3f, final reward %.3f, %ld env steps, checkpoint %s\n",
              r.success_rate, r.mean_reward_final, r.env_steps, r.checkpoint_path.c_str());
  return 0;
}

int cmd_distill(const RunConfig& c, uint64_t seed, const std::string& out,
                const std::string& teacher_ckpt) {
  if (teacher_ckpt.empty()) throw ConfigError("distill-student needs --teacher <checkpoint>");
  TrainTeacherConfig teacher_cfg;
  teacher_cfg.env = make_env_config(c);
  DaggerConfig cfg;
  cfg.warmup_iterations = static_cast<int>(c.integer("dagger.warmup"));
  cfg.iterations = static_cast<int>(c.integer("dagger.iterations"));
  cfg.steps_per_iteration = static_cast<int>(c.integer("dagger.steps"));
  cfg.epochs = static_cast<int>(c.integer("dagger.epochs"));
  cfg.minibatch = static_cast<int>(c.integer("dagger.minibatch"));
  cfg.lr = c.real("dagger.lr");
  cfg.holdout = static_cast<int>(c.integer("dagger.holdout"));
  cfg.eval_episodes = static_cast<int>(c.integer("dagger.eval_episodes"));
  cfg.seed = seed;
  cfg.out_dir = out;
  const DistillResult r = distill_student(teacher_cfg, teacher_ckpt, cfg);
  std::printf("distill-student: student %.3f vs teacher %.3f success, gripper agreement %.3f\n",
              r.student_success, r.teacher_success, r.gripper_agreement);
  if (!r.holdout_mse.empty())
    std::printf("  holdout mse first %.5f last %.5f\n", r.holdout_mse.front(),
                r.holdout_mse.back());
  return 0;
}

int cmd_eval(const RunConfig& c, uint64_t seed, const std::string& out) {
  const std::string ckpt = c.text("eval.checkpoint");
  PickupEnvConfig env_cfg = make_env_config(c);
  const int episodes = static_cast<int>(c.integer("eval.episodes"));

  Rng init(1);
  PickupEnv probe(env_cfg, seed);
  TeacherBundle teacher(probe.privileged_obs_dim(), init);
  const bool stub = ckpt.empty();  // zero-policy stub when no checkpoint given
  if (!stub) {
    teacher.load(ckpt);
    teacher.obs_norm.frozen = true;
  }

  JsonlWriter trace(out + "/eval_trace.jsonl");
  Eigen::VectorXd term_sums = Eigen::VectorXd::Zero(kHighRewardTerms);
  long term_steps = 0;
  int successes = 0;
  double ee_err_sum = 0.0, ee_err_min = 1e300, ee_err_max = 0.0;
  long ee_samples = 0;

  for (int ep = 0; ep < episodes; ++ep) {
    PickupEnv env(env_cfg, seed + 1000 + static_cast<uint64_t>(ep) * 37);
    while (env.status() == PickupStatus::ongoing && env.high_steps() < env_cfg.max_high_steps) {
      HighAction a;
      if (!stub) a = teacher.act_greedy(env.privileged_obs());
      const HighStepResult r = env.step(a);
      term_sums += r.breakdown.weighted;
      ++term_steps;
      // distance from the hand to its commanded goal point
      const InvariantFrame frame =
          InvariantFrame::from_base(env.robot().base, env_cfg.invariant_origin_height);
      const double err = (frame.to_world(r.low_command.p_cmd) - env.ee_world()).norm();
      ee_err_sum += err;
      ee_err_min = std::min(ee_err_min, err);
      ee_err_max = std::max(ee_err_max, err);
      ++ee_samples;
      if (ep == 0) {
        MetricRow row{{"step", static_cast<long>(env.high_steps())},
                      {"v_cmd", r.low_command.v_lin},
                      {"yaw_cmd", r.low_command.yaw_rate},
                      {"gripper", r.applied.gripper_close},
                      {"reward", r.reward},
                      {"stage", std::string(stage_name(env.episode().stage))},
                      {"ee_error", err}};
        for (int k = 0; k < kHighRewardTerms; ++k)
          row["r_" + std::string(kHighRewardNames[static_cast<size_t>(k)])] =
              r.breakdown.weighted[k];
        trace.write(row);
      }
    }
    if (env.status() == PickupStatus::success) ++successes;
  }
  trace.flush();

  const double success_rate = static_cast<double>(successes) / episodes;
  std::printf("eval: success rate %.3f over %d episodes (%s)\n", success_rate, episodes,
              stub ? "zero-policy stub" : ckpt.c_str());
  std::printf("  ee tracking error m: mean %.4f min %.4f max %.4f\n",
              ee_samples ? ee_err_sum / ee_samples : 0.0, ee_samples ? ee_err_min : 0.0,
              ee_err_max);
  JsonlWriter summary(out + "/eval_summary.jsonl");
  MetricRow row{{"success_rate", success_rate},
                {"episodes", static_cast<long>(episodes)},
                {"ee_err_mean", ee_samples ? ee_err_sum / ee_samples : 0.0},
                {"ee_err_min", ee_samples ? ee_err_min : 0.0},
                {"ee_err_max", ee_err_max}};
  for (int k = 0; k < kHighRewardTerms; ++k)
    row["mean_r_" + std::string(kHighRewardNames[static_cast<size_t>(k)])] =
        term_steps ? term_sums[k] / term_steps : 0.0;
  summary.write(row);
  summary.flush();
  return 0;
}

int cmd_harness(const RunConfig& c, uint64_t seed, const std::string& out) {
  TimingConfig timing;
  timing.duration = c.real("harness.duration");
  timing.server_proc_min = c.real("harness.proc_min");
  timing.server_proc_max = c.real("harness.proc_max");
  timing.request_latency = {0.0, c.real("harness.request_jitter")};
  timing.response_latency = {0.0, c.real("harness.response_jitter")};
  timing.seed = seed;

  // scripted high-level server: gentle forward walk with periodic grasp
  long counter = 0;
  auto server = [&counter](const Eigen::VectorXd&) {
    Eigen::Matrix<double, 9, 1> cmd = Eigen::Matrix<double, 9, 1>::Zero();
    cmd[6] = 0.3 * std::sin(0.2 * static_cast<double>(counter));
    cmd[8] = (counter / 40) % 2 == 1 ? 1.0 : 0.0;
    ++counter;
    return cmd;
  };
  const HarnessResult r = run_harness(timing, server);
  std::map<long, long> hist;
  for (long gap : r.ticks_per_command) ++hist[gap];
  std::printf("harness-run: %ld low ticks, %ld arm ticks, %ld requests, %ld responses\n",
              r.low_ticks, r.arm_ticks, r.requests_sent, r.responses_received);
  std::printf("  ticks per applied command:");
  for (const auto& [gap, n] : hist) std::printf(" %ld x%ld", gap, n);
  std::printf("\n");
  std::ofstream log(out + "/harness_log.jsonl");
  log << r.log;
  return 0;
}

int cmd_ik_bench(const RunConfig& c, uint64_t seed, const std::string& out) {
  const int samples = static_cast<int>(c.integer("ikbench.samples"));
  JsonlWriter metrics(out + "/ikbench.jsonl");

  // part 1: solver convergence on fk-constructed targets
  const KinematicChain arm = KinematicChain::default_arm();
  Rng rng(seed);
  int converged = 0;
  double pos_sum = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < samples; ++i) {
    JointVector q(6);
    for (int k = 0; k < 6; ++k)
      q[k] = rng.uniform(arm.joints()[static_cast<size_t>(k)].lower * 0.9,
                         arm.joints()[static_cast<size_t>(k)].upper * 0.9);
    const Pose target = forward_kinematics(arm, q);
    const IkResult r = solve_ik(arm, arm.mid_position(), target);
    if (r.pos_error < 1e-3) ++converged;
    pos_sum += r.pos_error;
  }
  const double solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("ik-bench solve: %d/%d reachable targets under 1 mm, mean err %.5f m, %.2f s\n",
              converged, samples, pos_sum / samples, solve_seconds);

  // part 2: goal tracking on the whole-body kinematic chain, goals sampled
  // as in training; a goal counts reached when the hand is within 2 cm
  const KinematicChain body = KinematicChain::body_arm();
  const GoalRanges ranges;
  JointVector q = body.mid_position();
  int reached = 0;
  double err_sum = 0.0, err_min = 1e300, err_max = 0.0;
  double orn_sum = 0.0;
  const Eigen::Vector3d origin_shift(0.0, 0.0, c.real("goals.origin_height") - 0.55);
  for (int i = 0; i < samples; ++i) {
    const SampledGoal g = sample_goal(rng, ranges);
    Pose target;
    target.position = g.position + origin_shift;
    target.orientation = g.orientation;
    IkOptions opts;
    opts.pos_tol = 0.002;  // episode ends inside 2 cm; solve tighter
    opts.orn_tol = 0.05;
    const IkResult r = solve_ik(body, q, target, opts);
    if (r.pos_error < 0.02) ++reached;
    err_sum += r.pos_error;
    err_min = std::min(err_min, r.pos_error);
    err_max = std::max(err_max, r.pos_error);
    orn_sum += r.orn_error;
    q = r.q;  // continue from the reached posture, as in training
  }
  std::printf(
      "ik-bench track: reached %d/%d within 2 cm; position error m mean %.4f min %.4f max %.4f; "
      "mean orientation error %.3f rad\n",
      reached, samples, err_sum / samples, err_min, err_max, orn_sum / samples);

  metrics.write({{"solve_converged", static_cast<long>(converged)},
                 {"solve_samples", static_cast<long>(samples)},
                 {"solve_mean_err", pos_sum / samples},
                 {"solve_seconds", solve_seconds},
                 {"track_reached", static_cast<long>(reached)},
                 {"track_mean_err", err_sum / samples},
                 {"track_min_err", err_min},
                 {"track_max_err", err_max},
                 {"track_mean_orn_err", orn_sum / samples}});
  metrics.flush();
  return 0;
}

int cmd_plot(const RunConfig&, const std::string& trace_path, const std::string& out) {
  std::ifstream in(trace_path);
  if (!in) throw std::runtime_error("plot: cannot open trace " + trace_path);
  std::vector<double> x, v, yaw, grip, reward, r_stage;
  std::string line;
  auto field = [](const std::string& l, const std::string& key) -> double {
    const std::string probe = "\"" + key + "\":";
    const size_t p = l.find(probe);
    if (p == std::string::npos) return 0.0;
    const std::string v2 = l.substr(p + probe.size());
    if (v2.rfind("true", 0) == 0) return 1.0;
    if (v2.rfind("false", 0) == 0) return 0.0;
    return std::atof(v2.c_str());
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    x.push_back(field(line, "step"));
    v.push_back(field(line, "v_cmd"));
    yaw.push_back(field(line, "yaw_cmd"));
    grip.push_back(field(line, "gripper"));
    reward.push_back(field(line, "reward"));
    r_stage.push_back(field(line, "r_approach") + field(line, "r_progress") +
                      field(line, "r_completion"));
  }
  if (x.empty()) throw std::runtime_error("plot: trace is empty");
  std::filesystem::create_directories(out);
  write_svg_chart(out + "/commands.svg", "velocity and gripper commands", x,
                  {{"v_lin [m/s]", v}, {"yaw rate [rad/s]", yaw}, {"gripper closed", grip}});
  write_svg_chart(out + "/rewards.svg", "reward and stage terms", x,
                  {{"total reward", reward}, {"stage term", r_stage}});
  std::printf("plot: wrote %s/commands.svg and %s/rewards.svg (%zu steps)\n", out.c_str(),
              out.c_str(), x.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale loco-manipulation training and control toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", low_ckpt, teacher_ckpt, trace_path;
  long seed_flag = -1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "run configuration file")->capture_default_str();
  app.add_option("--seed", seed_flag, "override run.seed");
  app.add_option("--out", out_dir, "output directory (overrides run.out)");
  app.add_option("--override", overrides, "key=value config overrides (repeatable)");

  auto* low = app.add_subcommand("train-low", "train the low-level goal-tracking policy");
  auto* teach = app.add_subcommand("train-teacher", "train the privileged pickup teacher");
  teach->add_option("--low", low_ckpt, "low-level checkpoint (default: gait reference)");
  auto* distill = app.add_subcommand("distill-student", "distill the vision student");
  distill->add_option("--teacher", teacher_ckpt, "teacher checkpoint")->required();
  auto* evalc = app.add_subcommand("eval", "evaluate a teacher checkpoint (or the zero stub)");
  auto* harn = app.add_subcommand("harness-run", "run the multi-rate control harness");
  auto* plot = app.add_subcommand("plot", "render SVG charts from an eval trace");
  plot->add_option("--trace", trace_path, "eval_trace.jsonl path")->required();
  auto* bench = app.add_subcommand("ik-bench", "inverse-kinematics reach benchmark");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    for (const auto& kv : overrides) cfg.apply_override(kv);
    if (seed_flag >= 0) cfg.set("run.seed", std::to_string(seed_flag));
    if (out_dir != "runs/out" || !cfg.has("run.out")) cfg.set("run.out", out_dir);
    const uint64_t seed = static_cast<uint64_t>(cfg.integer("run.seed"));
    const std::string out = cfg.text("run.out");
    std::filesystem::create_directories(out);

    std::string command;
    for (auto* sub :
         std::initializer_list<CLI::App*>{low, teach, distill, evalc, harn, plot, bench})
      if (sub->parsed()) command = sub->get_name();
    write_manifest(out, cfg, seed, command);

    if (low->parsed()) return cmd_train_low(cfg, seed, out);
    if (teach->parsed()) return cmd_train_teacher(cfg, seed, out, low_ckpt);
    if (distill->parsed()) return cmd_distill(cfg, seed, out, teacher_ckpt);
    if (evalc->parsed()) return cmd_eval(cfg, seed, out);
    if (harn->parsed()) return cmd_harness(cfg, seed, out);
    if (plot->parsed()) return cmd_plot(cfg, trace_path, out);
    if (bench->parsed()) return cmd_ik_bench(cfg, seed, out);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return 3;
  }
}
