#pragma once

#include <optional>
#include <string>
#include <vector>

#include "locoman/metrics.hpp"
#include "locoman/nn.hpp"
#include "locoman/pickup_env.hpp"

namespace locoman {

// ---------------------------------------------------------------------------
// PPO pieces

struct PpoConfig {
  double clip_eps = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double lr = 3e-4;
  int epochs = 5;
  int minibatch = 256;
  int rollout_steps = 64;  // per env per update
  int num_envs = 16;
  double entropy_coef = 0.002;
  double value_coef = 0.5;
  double max_grad_norm = 1.0;
  double initial_std = 0.5;
  double final_std = 0.1;  // exploration std annealed across the budget
  double target_kl = 0.03;  // early-stop threshold per update; <= 0 disables
};

/// Clipped-surrogate objective on data: mean(min(r*A, clip(r,1-eps,1+eps)*A)).
double ppo_surrogate(const Eigen::VectorXd& ratio, const Eigen::VectorXd& advantage, double eps);
double ppo_surrogate(double ratio, double advantage, double eps);

struct GaeResult {
  Eigen::VectorXd advantages;  // normalized when requested
  Eigen::VectorXd raw;         // pre-normalization estimates
  Eigen::VectorXd returns;     // raw + values
};

/// Generalized advantage estimation. values carries one bootstrap entry more
/// than rewards; dones[t] cuts the recursion after step t.
GaeResult estimate_advantage(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                             const std::vector<uint8_t>& dones, double gamma, double lambda,
                             bool normalize = true);

/// ROA composite loss on the tape: -ppo_objective
///   + lambda * ||z_mu - sg(z_phi)||_2 + ||sg(z_mu) - z_phi||_2.
Var roa_loss(Tape& t, Var ppo_objective, Var z_mu, Var z_phi, double lambda);

/// Per-feature running mean/variance normalizer, checkpointable.
struct RunningNorm {
  Parameter mean, var, count;  // count is a 1-element tensor

  RunningNorm() = default;
  RunningNorm(const std::string& name, int dim);
  void update(const Tensor& batch);  // [B, dim]
  Tensor apply(const Tensor& batch) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& row) const;
  void collect(std::vector<Parameter*>& out);
  bool frozen = false;
};

// ---------------------------------------------------------------------------
// Low-level training (ROA two-phase)

struct RoaState {
  enum class Phase { phase1, phase2 };
  Phase phase = Phase::phase1;
  double lambda = 0.0;
  int updates_done = 0;
  bool converged = false;  // phase-1 convergence criterion latched
};

struct TrainLowConfig {
  PpoConfig ppo;
  GoalTrackConfig env;
  int updates = 120;          // phase-1 budget
  int phase2_updates = 40;
  double lambda_max = 1.0;
  bool rma_mode = false;      // lambda held at zero (RMA special case)
  int convergence_window = 8;
  double convergence_slope = 0.05;  // mean-reward slope per update
  int eval_episodes = 8;
  uint64_t seed = 1;
  std::string out_dir;  // metrics + checkpoints; empty disables
};

struct TrainLowResult {
  double tracking_before = 0.0;  // mean phi(v*-v) at fixed +-0.6 commands
  double tracking_after = 0.0;
  double mean_reward_final = 0.0;
  RoaState roa;
  std::string checkpoint_path;
};

/// Bundle of everything the low-level controller needs at run time.
struct LowPolicyBundle {
  GaussianPolicy policy;   // 90 -> 12
  ValueNet value;
  EncoderNet encoder;      // z_env(20) -> z(20)
  AdaptationNet adaptation;  // history(70 x 25) -> z(20)
  RunningNorm obs_norm;    // over the 90-dim observation

  explicit LowPolicyBundle(Rng& rng, double initial_std = 0.5);
  std::vector<Parameter*> all_params();
  void save(const std::string& path);
  void load(const std::string& path);
};

TrainLowResult train_low(const TrainLowConfig& cfg);

/// Evaluation protocol for the tracking smoke: episodes driven at the
/// extreme command +-0.6 m/s, reporting mean phi(v* - v).
double eval_low_tracking(LowPolicyBundle& bundle, const GoalTrackConfig& env_cfg, int episodes,
                         uint64_t seed, bool use_adaptation = false);

// ---------------------------------------------------------------------------
// Teacher training

struct TeacherBundle {
  GaussianPolicy policy;  // privileged obs -> 9
  ValueNet value;
  RunningNorm obs_norm;

  TeacherBundle(int obs_dim, Rng& rng, double initial_std = 0.5, int hidden = 64);
  std::vector<Parameter*> all_params();
  void save(const std::string& path);
  void load(const std::string& path);
  HighAction act_greedy(const Eigen::VectorXd& obs);
  Eigen::Matrix<double, 9, 1> mean_action(const Eigen::VectorXd& obs);
};

struct TrainTeacherConfig {
  PpoConfig ppo;
  PickupEnvConfig env;
  int updates = 160;
  // command-clip curriculum: linear from clip_start to clip_end across
  // [curriculum_begin, curriculum_end] (fractions of the update budget)
  double clip_start = 0.6;
  double clip_end = 0.35;
  double curriculum_begin = 0.5;
  double curriculum_end = 0.9;
  // reward curriculum: r_cmd activates once the success EMA passes this
  // or the budget fraction passes cmd_activate_frac, whichever comes first
  double cmd_activate_success = 0.5;
  double cmd_activate_frac = 0.55;
  // observation-normalizer stats freeze after this many updates so the
  // policy's input representation stops drifting
  int norm_freeze_updates = 15;
  // reverse curriculum: near-table spawn probability annealed linearly from
  // near_start_init to 0 across [0, near_start_gone] of the update budget
  double near_start_init = 0.7;
  double near_start_gone = 0.6;
  int hidden = 64;  // teacher trunk width (two layers)
  // grasp-radius curriculum: annealed from grasp_radius_init down to the
  // environment's configured radius by grasp_radius_gone of the budget
  double grasp_radius_init = 0.10;
  double grasp_radius_gone = 0.7;
  int eval_episodes = 32;
  uint64_t seed = 1;
  std::string out_dir;
  std::string low_checkpoint;  // empty selects the gait-reference legs
};

struct TrainTeacherResult {
  double success_rate = 0.0;  // greedy evaluation at the end
  double mean_reward_final = 0.0;
  std::string checkpoint_path;
  long env_steps = 0;  // low-level steps consumed
};

TrainTeacherResult train_teacher(const TrainTeacherConfig& cfg);

double eval_teacher_success(TeacherBundle& teacher, const PickupEnvConfig& env_cfg, int episodes,
                            uint64_t seed);

// ---------------------------------------------------------------------------
// DAgger distillation

struct StudentBundle {
  StudentEncoder encoder;
  Mlp head;  // [64 + aux] -> 9
  RunningNorm aux_norm;
  int aux_dim = 52;

  StudentBundle(int channels, int height, int width, int aux_dim, Rng& rng);
  std::vector<Parameter*> all_params();
  void save(const std::string& path);
  void load(const std::string& path);
  Var forward(Tape& t, Var images, Var aux);
  Eigen::Matrix<double, 9, 1> act(const StudentObs& obs);
};

struct DaggerConfig {
  int warmup_iterations = 2;   // teacher-sampled iterations
  int iterations = 10;
  int steps_per_iteration = 256;  // high-level env steps collected
  int epochs = 3;
  int minibatch = 64;
  double lr = 1e-3;
  double max_grad_norm = 1.0;
  int holdout = 256;  // transitions reserved for the eval MSE
  int eval_episodes = 16;
  uint64_t seed = 1;
  std::string out_dir;
};

struct DistillResult {
  std::vector<double> holdout_mse;  // one entry per iteration
  double student_success = 0.0;
  double teacher_success = 0.0;
  double gripper_agreement = 0.0;
  std::string checkpoint_path;
};

DistillResult distill_student(const TrainTeacherConfig& teacher_env_cfg,
                              const std::string& teacher_checkpoint, const DaggerConfig& cfg);

/// Linear-teacher synthetic distillation (convex regression oracle): the
/// same DAgger loop shape on states from a driven linear system.
struct SyntheticDaggerResult {
  std::vector<double> holdout_mse;
};
SyntheticDaggerResult dagger_linear_synthetic(int iterations, int steps_per_iteration, double lr,
                                              uint64_t seed);

}  // namespace locoman
