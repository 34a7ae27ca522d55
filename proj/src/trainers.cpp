#include "locoman/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>

namespace locoman {

// ---------------------------------------------------------------------------
// PPO pieces

double ppo_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double ppo_surrogate(const Eigen::VectorXd& ratio, const Eigen::VectorXd& advantage, double eps) {
  if (ratio.size() != advantage.size())
    throw std::invalid_argument("ppo_surrogate: length mismatch");
  double sum = 0.0;
  for (int i = 0; i < ratio.size(); ++i) sum += ppo_surrogate(ratio[i], advantage[i], eps);
  return sum / static_cast<double>(ratio.size());
}

GaeResult estimate_advantage(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                             const std::vector<uint8_t>& dones, double gamma, double lambda,
                             bool normalize) {
  const int T = static_cast<int>(rewards.size());
  if (values.size() != T + 1 || static_cast<int>(dones.size()) != T)
    throw std::invalid_argument("estimate_advantage: values needs T+1 entries, dones needs T");
  GaeResult out;
  out.raw.resize(T);
  out.returns.resize(T);
  double acc = 0.0;
  for (int t = T - 1; t >= 0; --t) {
    const double not_done = dones[static_cast<size_t>(t)] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
    acc = delta + gamma * lambda * not_done * acc;
    out.raw[t] = acc;
    out.returns[t] = acc + values[t];
  }
  out.advantages = out.raw;
  if (normalize && T > 1) {
    const double mean = out.raw.mean();
    const double var = (out.raw.array() - mean).square().sum() / T;
    const double std = std::sqrt(std::max(var, 0.0));
    out.advantages = (out.raw.array() - mean) / (std + 1e-8);
  }
  return out;
}

Var roa_loss(Tape& t, Var ppo_objective, Var z_mu, Var z_phi, double lambda) {
  if (!t.value(z_mu).same_shape(t.value(z_phi)))
    throw std::invalid_argument("roa_loss: latent dimension mismatch");
  Var loss = t.neg(ppo_objective);
  Var reg_mu = t.norm2(t.sub(z_mu, t.stop_gradient(z_phi)));
  Var reg_phi = t.norm2(t.sub(t.stop_gradient(z_mu), z_phi));
  loss = t.add(loss, t.scale(reg_mu, static_cast<Real>(lambda)));
  return t.add(loss, reg_phi);
}

// ---------------------------------------------------------------------------
// RunningNorm

RunningNorm::RunningNorm(const std::string& name, int dim)
    : mean(name + ".mean", Tensor({dim})),
      var(name + ".var", Tensor({dim})),
      count(name + ".count", Tensor({1})) {
  for (auto& v : var.value.data) v = Real(1);
  count.value[0] = Real(1e-4);
}

void RunningNorm::update(const Tensor& batch) {
  if (frozen) return;
  const int B = batch.rows(), D = batch.cols();
  if (D != mean.value.size()) throw std::invalid_argument("RunningNorm: dim mismatch");
  // Welford-style batched update
  Eigen::VectorXd bmean = Eigen::VectorXd::Zero(D), bvar = Eigen::VectorXd::Zero(D);
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < D; ++c) bmean[c] += static_cast<double>(batch[static_cast<size_t>(r * D + c)]);
  bmean /= B;
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < D; ++c) {
      const double d = static_cast<double>(batch[static_cast<size_t>(r * D + c)]) - bmean[c];
      bvar[c] += d * d;
    }
  bvar /= B;

  const double n0 = static_cast<double>(count.value[0]);
  const double n1 = static_cast<double>(B);
  const double tot = n0 + n1;
  for (int c = 0; c < D; ++c) {
    const double m0 = static_cast<double>(mean.value[static_cast<size_t>(c)]);
    const double v0 = static_cast<double>(var.value[static_cast<size_t>(c)]);
    const double delta = bmean[c] - m0;
    const double m_new = m0 + delta * n1 / tot;
    const double m_a = v0 * n0;
    const double m_b = bvar[c] * n1;
    const double v_new = (m_a + m_b + delta * delta * n0 * n1 / tot) / tot;
    mean.value[static_cast<size_t>(c)] = static_cast<Real>(m_new);
    var.value[static_cast<size_t>(c)] = static_cast<Real>(v_new);
  }
  count.value[0] = static_cast<Real>(tot);
}

Tensor RunningNorm::apply(const Tensor& batch) const {
  const int B = batch.rows(), D = batch.cols();
  Tensor out = batch;
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < D; ++c) {
      const double m = static_cast<double>(mean.value[static_cast<size_t>(c)]);
      const double v = static_cast<double>(var.value[static_cast<size_t>(c)]);
      double z = (static_cast<double>(batch[static_cast<size_t>(r * D + c)]) - m) /
                 std::sqrt(v + 1e-8);
      out[static_cast<size_t>(r * D + c)] = static_cast<Real>(std::clamp(z, -10.0, 10.0));
    }
  return out;
}

Eigen::VectorXd RunningNorm::apply(const Eigen::VectorXd& row) const {
  Eigen::VectorXd out(row.size());
  for (int c = 0; c < row.size(); ++c) {
    const double m = static_cast<double>(mean.value[static_cast<size_t>(c)]);
    const double v = static_cast<double>(var.value[static_cast<size_t>(c)]);
    out[c] = std::clamp((row[c] - m) / std::sqrt(v + 1e-8), -10.0, 10.0);
  }
  return out;
}

void RunningNorm::collect(std::vector<Parameter*>& out) {
  out.push_back(&mean);
  out.push_back(&var);
  out.push_back(&count);
}

// ---------------------------------------------------------------------------
// Bundles

LowPolicyBundle::LowPolicyBundle(Rng& rng, double initial_std)
    : policy("low", ObsLowLayout::kTotal, {128, 128, 128}, 12, rng, initial_std),
      value("low", ObsLowLayout::kTotal, {128, 128, 128}, rng),
      encoder("low.encoder", kExtrinsicsDim, kExtrinsicsDim, rng),
      adaptation("low.adaptation", 70, kExtrinsicsDim, 25, rng),
      obs_norm("low.obs_norm", ObsLowLayout::kTotal) {}

std::vector<Parameter*> LowPolicyBundle::all_params() {
  std::vector<Parameter*> out;
  policy.collect(out);
  value.collect(out);
  encoder.collect(out);
  adaptation.collect(out);
  obs_norm.collect(out);
  return out;
}

void LowPolicyBundle::save(const std::string& path) { save_checkpoint(path, all_params()); }
void LowPolicyBundle::load(const std::string& path) {
  assign_checkpoint(all_params(), load_checkpoint(path));
}

TeacherBundle::TeacherBundle(int obs_dim, Rng& rng, double initial_std, int hidden)
    : policy("teacher", obs_dim, {hidden, hidden}, 9, rng, initial_std),
      value("teacher", obs_dim, {hidden, hidden}, rng),
      obs_norm("teacher.obs_norm", obs_dim) {}

std::vector<Parameter*> TeacherBundle::all_params() {
  std::vector<Parameter*> out;
  policy.collect(out);
  value.collect(out);
  obs_norm.collect(out);
  return out;
}

void TeacherBundle::save(const std::string& path) { save_checkpoint(path, all_params()); }
void TeacherBundle::load(const std::string& path) {
  assign_checkpoint(all_params(), load_checkpoint(path));
}

Eigen::Matrix<double, 9, 1> TeacherBundle::mean_action(const Eigen::VectorXd& obs) {
  const Eigen::VectorXd n = obs_norm.apply(obs);
  Tensor in({1, static_cast<int>(n.size())});
  for (int i = 0; i < n.size(); ++i) in[static_cast<size_t>(i)] = static_cast<Real>(n[i]);
  Tape t;
  Var mu = policy.mean(t, t.input(in));
  Eigen::Matrix<double, 9, 1> out;
  for (int i = 0; i < 9; ++i) out[i] = static_cast<double>(t.value(mu)[static_cast<size_t>(i)]);
  return out;
}

HighAction TeacherBundle::act_greedy(const Eigen::VectorXd& obs) {
  return HighAction::from_vector(mean_action(obs));
}

StudentBundle::StudentBundle(int channels, int height, int width, int aux_dim_, Rng& rng)
    : encoder("student.encoder", channels, height, width, rng),
      head("student.head", 64 + aux_dim_, {64, 64}, 9, rng),
      aux_norm("student.aux_norm", aux_dim_), aux_dim(aux_dim_) {}

std::vector<Parameter*> StudentBundle::all_params() {
  std::vector<Parameter*> out;
  encoder.collect(out);
  head.collect(out);
  aux_norm.collect(out);
  return out;
}

void StudentBundle::save(const std::string& path) { save_checkpoint(path, all_params()); }
void StudentBundle::load(const std::string& path) {
  assign_checkpoint(all_params(), load_checkpoint(path));
}

Var StudentBundle::forward(Tape& t, Var images, Var aux) {
  Var latent = encoder(t, images);
  return head(t, t.concat_cols(latent, aux));
}

Eigen::Matrix<double, 9, 1> StudentBundle::act(const StudentObs& obs) {
  Tensor img({1, obs.channels, obs.height, obs.width});
  for (size_t i = 0; i < obs.image.size(); ++i) img[i] = static_cast<Real>(obs.image[i]);
  const Eigen::VectorXd aux_n = aux_norm.apply(obs.aux);
  Tensor aux({1, aux_dim});
  for (int i = 0; i < aux_dim; ++i) aux[static_cast<size_t>(i)] = static_cast<Real>(aux_n[i]);
  Tape t;
  Var out = forward(t, t.input(img), t.input(aux));
  Eigen::Matrix<double, 9, 1> a;
  for (int i = 0; i < 9; ++i) a[i] = static_cast<double>(t.value(out)[static_cast<size_t>(i)]);
  return a;
}

// ---------------------------------------------------------------------------
// Shared PPO helpers

namespace {

Tensor to_tensor_rows(const std::vector<Eigen::VectorXd>& rows) {
  const int B = static_cast<int>(rows.size());
  const int D = static_cast<int>(rows[0].size());
  Tensor t({B, D});
  for (int r = 0; r < B; ++r)
    for (int c = 0; c < D; ++c) t[static_cast<size_t>(r * D + c)] = static_cast<Real>(rows[static_cast<size_t>(r)][c]);
  return t;
}

double gaussian_logp(const Eigen::VectorXd& action, const Eigen::VectorXd& mean,
                     const Parameter& log_std) {
  double lp = -0.5 * action.size() * std::log(2.0 * M_PI);
  for (int i = 0; i < action.size(); ++i) {
    const double ls = static_cast<double>(log_std.value[static_cast<size_t>(i)]);
    const double z = (action[i] - mean[i]) * std::exp(-ls);
    lp += -0.5 * z * z - ls;
  }
  return lp;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    const int j = rng.uniform_int(0, i);
    std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
  }
}

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  int minibatches = 0;
};

/// One PPO optimization pass over a flat batch (teacher-style: the policy
/// consumes a precomputed observation tensor). Separate optimizers keep the
/// critic's large gradients out of the actor's clip budget; an approximate-KL
/// early stop guards against destructive updates.
PpoStats ppo_update_flat(GaussianPolicy& policy, ValueNet& value, Adam& opt_pi, Adam& opt_v,
                         const std::vector<Eigen::VectorXd>& obs,
                         const std::vector<Eigen::VectorXd>& actions,
                         const Eigen::VectorXd& logp_old, const Eigen::VectorXd& advantages,
                         const Eigen::VectorXd& returns, const PpoConfig& cfg, Rng& rng) {
  PpoStats stats;
  const int N = static_cast<int>(obs.size());
  std::vector<int> idx(static_cast<size_t>(N));
  std::iota(idx.begin(), idx.end(), 0);

  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    shuffle_indices(idx, rng);
    for (int start = 0; start < N && !stop; start += cfg.minibatch) {
      const int M = std::min(cfg.minibatch, N - start);
      std::vector<Eigen::VectorXd> obs_mb(static_cast<size_t>(M)), act_mb(static_cast<size_t>(M));
      Tensor lp_old({M, 1}), adv({M, 1}), ret({M, 1});
      for (int i = 0; i < M; ++i) {
        const int k = idx[static_cast<size_t>(start + i)];
        obs_mb[static_cast<size_t>(i)] = obs[static_cast<size_t>(k)];
        act_mb[static_cast<size_t>(i)] = actions[static_cast<size_t>(k)];
        lp_old[static_cast<size_t>(i)] = static_cast<Real>(logp_old[k]);
        adv[static_cast<size_t>(i)] = static_cast<Real>(advantages[k]);
        ret[static_cast<size_t>(i)] = static_cast<Real>(returns[k]);
      }

      Tape t;
      Var obs_var = t.input(to_tensor_rows(obs_mb));
      Var mu = policy.mean(t, obs_var);
      Var logp = policy.log_prob(t, mu, to_tensor_rows(act_mb));
      Var ratio = t.exp_op(t.sub(logp, t.input(lp_old)));
      Var adv_var = t.input(adv);
      Var surr1 = t.mul(ratio, adv_var);
      Var surr2 = t.mul(t.clamp(ratio, static_cast<Real>(1.0 - cfg.clip_eps),
                                static_cast<Real>(1.0 + cfg.clip_eps)),
                        adv_var);
      Var objective = t.mean(t.min_op(surr1, surr2));
      Var v = value(t, obs_var);
      Var v_loss = t.mean(t.square(t.sub(v, t.input(ret))));
      Var entropy = policy.entropy(t);
      Var loss = t.add(t.neg(objective), t.scale(v_loss, static_cast<Real>(cfg.value_coef)));
      loss = t.sub(loss, t.scale(entropy, static_cast<Real>(cfg.entropy_coef)));
      t.backward(loss);
      opt_pi.step();
      opt_v.step();

      // approximate KL between the sampling policy and the current one
      double kl = 0.0;
      const Tensor& lp_new = t.value(logp);
      for (int i = 0; i < lp_new.rows(); ++i)
        kl += static_cast<double>(lp_old[static_cast<size_t>(i)]) -
              static_cast<double>(lp_new[static_cast<size_t>(i)]);
      kl /= lp_new.rows();
      if (cfg.target_kl > 0.0 && kl > cfg.target_kl) stop = true;

      stats.policy_loss += -static_cast<double>(t.value(objective)[0]);
      stats.value_loss += static_cast<double>(t.value(v_loss)[0]);
      stats.entropy = static_cast<double>(t.value(entropy)[0]);
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    stats.policy_loss /= stats.minibatches;
    stats.value_loss /= stats.minibatches;
  }
  return stats;
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace

// ---------------------------------------------------------------------------
// Teacher training

namespace {

HighAction action_from_sample(const Eigen::VectorXd& a) {
  Eigen::Matrix<double, 9, 1> v;
  for (int i = 0; i < 9; ++i) v[i] = a[i];
  return HighAction::from_vector(v);
}

}  // namespace

TrainTeacherResult train_teacher(const TrainTeacherConfig& cfg) {
  ensure_dir(cfg.out_dir);
  JsonlWriter metrics(cfg.out_dir.empty() ? "" : cfg.out_dir + "/teacher_metrics.jsonl");

  Rng init_rng(cfg.seed);
  const int num_envs = cfg.ppo.num_envs;
  std::vector<std::unique_ptr<PickupEnv>> envs;
  for (int i = 0; i < num_envs; ++i)
    envs.push_back(std::make_unique<PickupEnv>(cfg.env, cfg.seed * 9973 + static_cast<uint64_t>(i)));

  std::shared_ptr<LowPolicyBundle> low;
  if (!cfg.low_checkpoint.empty()) {
    Rng lr(1);
    low = std::make_shared<LowPolicyBundle>(lr);
    low->load(cfg.low_checkpoint);
    for (auto& env : envs)
      env->set_low_policy([low](const Eigen::VectorXd& obs) {
        const Eigen::VectorXd n = low->obs_norm.apply(obs);
        Tensor in({1, static_cast<int>(n.size())});
        for (int i = 0; i < n.size(); ++i) in[static_cast<size_t>(i)] = static_cast<Real>(n[i]);
        Tape t;
        Var mu = low->policy.mean(t, t.input(in));
        Eigen::VectorXd a(12);
        for (int i = 0; i < 12; ++i) a[i] = static_cast<double>(t.value(mu)[static_cast<size_t>(i)]);
        return a;
      });
  }

  const int obs_dim = envs[0]->privileged_obs_dim();
  TeacherBundle teacher(obs_dim, init_rng, cfg.ppo.initial_std, cfg.hidden);
  std::vector<Parameter*> pi_params, v_params;
  teacher.policy.trunk.collect(pi_params);  // std follows a schedule
  teacher.value.collect(v_params);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.ppo.lr;
  adam_cfg.max_grad_norm = cfg.ppo.max_grad_norm;
  Adam opt_pi(pi_params, adam_cfg);
  Adam opt_v(v_params, adam_cfg);

  Rng rng(cfg.seed + 1000);
  const int T = cfg.ppo.rollout_steps;
  double success_ema = 0.0;
  double near_success_ema = 0.0;
  double far_dmin_ema = 1.0;
  std::vector<double> ep_dmin(static_cast<size_t>(num_envs), 1e9);
  bool cmd_active = false;
  long env_steps = 0;
  double mean_reward_final = 0.0;

  for (auto& env : envs) env->set_cmd_term_active(false);

  for (int update = 0; update < cfg.updates; ++update) {
    if (update == cfg.norm_freeze_updates) teacher.obs_norm.frozen = true;
    // command-clip curriculum
    const double frac = cfg.updates > 1 ? static_cast<double>(update) / (cfg.updates - 1) : 1.0;
    const double ramp = std::clamp(
        (frac - cfg.curriculum_begin) / std::max(1e-9, cfg.curriculum_end - cfg.curriculum_begin),
        0.0, 1.0);
    const double v_limit = cfg.clip_start + (cfg.clip_end - cfg.clip_start) * ramp;
    const double sched_std =
        cfg.ppo.initial_std + (cfg.ppo.final_std - cfg.ppo.initial_std) * frac;
    for (auto& v : teacher.policy.log_std.value.data)
      v = static_cast<Real>(std::log(sched_std));
    double near_p =
        cfg.near_start_init * std::max(0.0, 1.0 - frac / std::max(1e-9, cfg.near_start_gone));
    if (frac < 0.9) near_p = std::max(near_p, 0.15);  // keep the basin refreshed
    // expanding horizon: near spawns stretch out until they match far starts
    const double standoff_hi = 0.6 + 0.15 * std::min(1.0, frac / 0.6);
    const double grasp_r =
        cfg.env.grasp_radius + (cfg.grasp_radius_init - cfg.env.grasp_radius) *
                                   std::max(0.0, 1.0 - frac / std::max(1e-9, cfg.grasp_radius_gone));
    for (auto& env : envs) {
      env->set_v_limit(v_limit);
      env->set_near_start_prob(0.6 * near_p, 0.4 * near_p);
      env->set_grasp_radius(grasp_r);
      env->set_near_standoff(0.25, standoff_hi);
    }

    std::vector<Eigen::VectorXd> obs_data, act_data;
    obs_data.reserve(static_cast<size_t>(T * num_envs));
    Eigen::MatrixXd rewards(T, num_envs), values(T + 1, num_envs);
    Eigen::VectorXd logp_flat(T * num_envs);
    std::vector<uint8_t> dones(static_cast<size_t>(T * num_envs), 0);

    for (int step = 0; step < T; ++step) {
      // batch the policy over envs
      std::vector<Eigen::VectorXd> raw(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e) raw[static_cast<size_t>(e)] = envs[static_cast<size_t>(e)]->privileged_obs();
      Tensor raw_t = to_tensor_rows(raw);
      teacher.obs_norm.update(raw_t);
      std::vector<Eigen::VectorXd> normed(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e) normed[static_cast<size_t>(e)] = teacher.obs_norm.apply(raw[static_cast<size_t>(e)]);

      Tape t;
      Var obs_var = t.input(to_tensor_rows(normed));
      Var mu = teacher.policy.mean(t, obs_var);
      Var val = teacher.value(t, obs_var);
      for (int e = 0; e < num_envs; ++e) {
        Eigen::VectorXd mean_row(9);
        for (int i = 0; i < 9; ++i)
          mean_row[i] = static_cast<double>(t.value(mu)[static_cast<size_t>(e * 9 + i)]);
        Eigen::VectorXd action(9);
        for (int i = 0; i < 9; ++i)
          action[i] = mean_row[i] +
                      std::exp(static_cast<double>(teacher.policy.log_std.value[static_cast<size_t>(i)])) *
                          rng.gaussian();
        const double lp = gaussian_logp(action, mean_row, teacher.policy.log_std);

        const HighStepResult r = envs[static_cast<size_t>(e)]->step(action_from_sample(action));
        env_steps += envs[static_cast<size_t>(e)]->params().calls_per_high;
        ep_dmin[static_cast<size_t>(e)] =
            std::min(ep_dmin[static_cast<size_t>(e)],
                     (envs[static_cast<size_t>(e)]->ee_world() -
                      envs[static_cast<size_t>(e)]->object().grasp_point())
                         .norm());

        obs_data.push_back(normed[static_cast<size_t>(e)]);
        act_data.push_back(action);
        logp_flat[step * num_envs + e] = lp;
        rewards(step, e) = r.reward;
        values(step, e) = static_cast<double>(t.value(val)[static_cast<size_t>(e)]);
        const bool done = r.status == PickupStatus::fail ||
                          envs[static_cast<size_t>(e)]->high_steps() >= cfg.env.max_high_steps;
        dones[static_cast<size_t>(step * num_envs + e)] = done ? 1 : 0;
        if (done) {
          const bool success = envs[static_cast<size_t>(e)]->episode().success;
          if (envs[static_cast<size_t>(e)]->was_near_start()) {
            near_success_ema = 0.95 * near_success_ema + 0.05 * (success ? 1.0 : 0.0);
          } else {
            success_ema = 0.95 * success_ema + 0.05 * (success ? 1.0 : 0.0);
            far_dmin_ema = 0.9 * far_dmin_ema + 0.1 * ep_dmin[static_cast<size_t>(e)];
          }
          ep_dmin[static_cast<size_t>(e)] = 1e9;
          envs[static_cast<size_t>(e)]->reset();
        }
      }
    }

    // bootstrap values
    {
      std::vector<Eigen::VectorXd> raw(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e)
        raw[static_cast<size_t>(e)] = teacher.obs_norm.apply(envs[static_cast<size_t>(e)]->privileged_obs());
      Tape t;
      Var val = teacher.value(t, t.input(to_tensor_rows(raw)));
      for (int e = 0; e < num_envs; ++e)
        values(T, e) = static_cast<double>(t.value(val)[static_cast<size_t>(e)]);
    }

    // reward curriculum: r_cmd switches on once the robot "learns well"
    // (success EMA) or on schedule, whichever happens first
    if (!cmd_active &&
        (success_ema > cfg.cmd_activate_success || frac > cfg.cmd_activate_frac)) {
      cmd_active = true;
      for (auto& env : envs) env->set_cmd_term_active(true);
    }

    // per-env GAE, flattened in (step, env) order
    Eigen::VectorXd adv_flat(T * num_envs), ret_flat(T * num_envs);
    for (int e = 0; e < num_envs; ++e) {
      Eigen::VectorXd r_col(T), v_col(T + 1);
      std::vector<uint8_t> d_col(static_cast<size_t>(T));
      for (int s = 0; s < T; ++s) {
        r_col[s] = rewards(s, e);
        v_col[s] = values(s, e);
        d_col[static_cast<size_t>(s)] = dones[static_cast<size_t>(s * num_envs + e)];
      }
      v_col[T] = values(T, e);
      const GaeResult g = estimate_advantage(r_col, v_col, d_col, cfg.ppo.gamma,
                                             cfg.ppo.gae_lambda, false);
      for (int s = 0; s < T; ++s) {
        adv_flat[s * num_envs + e] = g.raw[s];
        ret_flat[s * num_envs + e] = g.returns[s];
      }
    }
    const double amean = adv_flat.mean();
    const double astd = std::sqrt((adv_flat.array() - amean).square().sum() / adv_flat.size());
    adv_flat = (adv_flat.array() - amean) / (astd + 1e-8);

    const PpoStats st = ppo_update_flat(teacher.policy, teacher.value, opt_pi, opt_v, obs_data,
                                        act_data, logp_flat, adv_flat, ret_flat, cfg.ppo, rng);

    mean_reward_final = rewards.mean();
    metrics.write({{"update", static_cast<long>(update)},
                   {"mean_reward", mean_reward_final},
                   {"success_ema", success_ema},
                   {"near_success_ema", near_success_ema},
                   {"near_start_prob", near_p},
                   {"grasp_radius", grasp_r},
                   {"far_dmin_ema", far_dmin_ema},
                   {"policy_loss", st.policy_loss},
                   {"value_loss", st.value_loss},
                   {"entropy", st.entropy},
                   {"v_limit", v_limit},
                   {"cmd_term_active", cmd_active},
                   {"mean_log_std",
                    [&] {
                      double s = 0.0;
                      for (Real v : teacher.policy.log_std.value.data) s += static_cast<double>(v);
                      return s / teacher.policy.log_std.value.size();
                    }()},
                   {"env_steps", env_steps}});
  }
  metrics.flush();

  TrainTeacherResult result;
  result.mean_reward_final = mean_reward_final;
  result.env_steps = env_steps;
  teacher.obs_norm.frozen = true;
  result.success_rate = eval_teacher_success(teacher, cfg.env, cfg.eval_episodes, cfg.seed + 777);
  if (!cfg.out_dir.empty()) {
    result.checkpoint_path = cfg.out_dir + "/teacher.ckpt";
    teacher.save(result.checkpoint_path);
  }
  return result;
}

double eval_teacher_success(TeacherBundle& teacher, const PickupEnvConfig& env_cfg, int episodes,
                            uint64_t seed) {
  int successes = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    PickupEnv env(env_cfg, seed + static_cast<uint64_t>(ep) * 131);
    while (env.status() == PickupStatus::ongoing &&
           env.high_steps() < env_cfg.max_high_steps) {
      env.step(teacher.act_greedy(env.privileged_obs()));
    }
    if (env.status() == PickupStatus::success) ++successes;
  }
  return episodes > 0 ? static_cast<double>(successes) / episodes : 0.0;
}

// ---------------------------------------------------------------------------
// Low-level training (ROA)

namespace {

struct LowRollout {
  std::vector<Eigen::VectorXd> obs_no_z;   // raw 90 with zeroed z slot
  std::vector<Eigen::VectorXd> z_env;      // encoder input
  std::vector<Eigen::MatrixXd> history;    // adaptation input (70 x 25)
  std::vector<Eigen::VectorXd> actions;
  Eigen::VectorXd logp, adv, ret;
};

Eigen::VectorXd fill_z(const Eigen::VectorXd& obs_no_z, const Eigen::VectorXd& z) {
  Eigen::VectorXd o = obs_no_z;
  o.segment(ObsLowLayout::kExtrinsics, kExtrinsicsDim) = z;
  return o;
}

Tensor history_tensor(const std::vector<Eigen::MatrixXd>& hists, const std::vector<int>& idx,
                      int start, int M) {
  const int F = static_cast<int>(hists[0].rows());
  const int T = static_cast<int>(hists[0].cols());
  Tensor t({M, F, T});
  for (int i = 0; i < M; ++i) {
    const Eigen::MatrixXd& h = hists[static_cast<size_t>(idx[static_cast<size_t>(start + i)])];
    for (int f = 0; f < F; ++f)
      for (int k = 0; k < T; ++k)
        t[static_cast<size_t>((i * F + f) * T + k)] = static_cast<Real>(h(f, k));
  }
  return t;
}

}  // namespace

TrainLowResult train_low(const TrainLowConfig& cfg) {
  ensure_dir(cfg.out_dir);
  JsonlWriter metrics(cfg.out_dir.empty() ? "" : cfg.out_dir + "/low_metrics.jsonl");

  Rng init_rng(cfg.seed);
  LowPolicyBundle bundle(init_rng, cfg.ppo.initial_std);

  const int num_envs = cfg.ppo.num_envs;
  std::vector<std::unique_ptr<GoalTrackEnv>> envs;
  for (int i = 0; i < num_envs; ++i)
    envs.push_back(std::make_unique<GoalTrackEnv>(cfg.env, cfg.seed * 7919 + static_cast<uint64_t>(i)));

  TrainLowResult result;
  result.tracking_before = eval_low_tracking(bundle, cfg.env, cfg.eval_episodes, cfg.seed + 555);

  std::vector<Parameter*> phase1_params;
  bundle.policy.trunk.collect(phase1_params);  // std follows a schedule
  bundle.encoder.collect(phase1_params);
  std::vector<Parameter*> v_params;
  bundle.value.collect(v_params);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.ppo.lr;
  adam_cfg.max_grad_norm = cfg.ppo.max_grad_norm;
  Adam opt_pi(phase1_params, adam_cfg);
  Adam opt_v(v_params, adam_cfg);

  Rng rng(cfg.seed + 2000);
  const int T = cfg.ppo.rollout_steps;
  RoaState roa;
  std::vector<double> reward_history;

  auto collect = [&](bool use_adaptation, LowRollout& out, double& mean_reward) {
    const int N = T * num_envs;
    out.obs_no_z.resize(static_cast<size_t>(N));
    out.z_env.resize(static_cast<size_t>(N));
    out.history.resize(static_cast<size_t>(N));
    out.actions.resize(static_cast<size_t>(N));
    out.logp.resize(N);
    Eigen::MatrixXd rewards(T, num_envs), values(T + 1, num_envs);
    std::vector<uint8_t> dones(static_cast<size_t>(N), 0);

    auto latent_for = [&](int e) {
      Tape t;
      Var z;
      if (use_adaptation) {
        const Eigen::MatrixXd h = envs[static_cast<size_t>(e)]->obs_history();
        Tensor ht({1, static_cast<int>(h.rows()), static_cast<int>(h.cols())});
        for (int f = 0; f < h.rows(); ++f)
          for (int k = 0; k < h.cols(); ++k)
            ht[static_cast<size_t>(f * h.cols() + k)] = static_cast<Real>(h(f, k));
        z = bundle.adaptation(t, t.input(ht));
      } else {
        const Eigen::VectorXd ze = envs[static_cast<size_t>(e)]->z_env();
        Tensor zt({1, kExtrinsicsDim});
        for (int i = 0; i < kExtrinsicsDim; ++i) zt[static_cast<size_t>(i)] = static_cast<Real>(ze[i]);
        z = bundle.encoder(t, t.input(zt));
      }
      Eigen::VectorXd out_z(kExtrinsicsDim);
      for (int i = 0; i < kExtrinsicsDim; ++i)
        out_z[i] = static_cast<double>(t.value(z)[static_cast<size_t>(i)]);
      return out_z;
    };

    for (int step = 0; step < T; ++step) {
      std::vector<Eigen::VectorXd> obs_rows(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e) {
        const int k = step * num_envs + e;
        out.obs_no_z[static_cast<size_t>(k)] = envs[static_cast<size_t>(e)]->obs_no_z();
        out.z_env[static_cast<size_t>(k)] = envs[static_cast<size_t>(e)]->z_env();
        out.history[static_cast<size_t>(k)] = envs[static_cast<size_t>(e)]->obs_history();
        const Eigen::VectorXd z = latent_for(e);
        obs_rows[static_cast<size_t>(e)] = fill_z(out.obs_no_z[static_cast<size_t>(k)], z);
      }
      Tensor raw_t = to_tensor_rows(obs_rows);
      bundle.obs_norm.update(raw_t);
      std::vector<Eigen::VectorXd> normed(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e)
        normed[static_cast<size_t>(e)] = bundle.obs_norm.apply(obs_rows[static_cast<size_t>(e)]);

      Tape t;
      Var obs_var = t.input(to_tensor_rows(normed));
      Var mu = bundle.policy.mean(t, obs_var);
      Var val = bundle.value(t, obs_var);
      for (int e = 0; e < num_envs; ++e) {
        const int k = step * num_envs + e;
        Eigen::VectorXd mean_row(12), action(12);
        for (int i = 0; i < 12; ++i) {
          mean_row[i] = static_cast<double>(t.value(mu)[static_cast<size_t>(e * 12 + i)]);
          action[i] = mean_row[i] +
                      std::exp(static_cast<double>(bundle.policy.log_std.value[static_cast<size_t>(i)])) *
                          rng.gaussian();
        }
        out.actions[static_cast<size_t>(k)] = action;
        out.logp[k] = gaussian_logp(action, mean_row, bundle.policy.log_std);
        const auto sr = envs[static_cast<size_t>(e)]->step(action);
        rewards(step, e) = sr.reward;
        values(step, e) = static_cast<double>(t.value(val)[static_cast<size_t>(e)]);
        dones[static_cast<size_t>(k)] = sr.done ? 1 : 0;
        if (sr.done) envs[static_cast<size_t>(e)]->reset();
      }
    }
    {
      std::vector<Eigen::VectorXd> rows(static_cast<size_t>(num_envs));
      for (int e = 0; e < num_envs; ++e)
        rows[static_cast<size_t>(e)] = bundle.obs_norm.apply(
            fill_z(envs[static_cast<size_t>(e)]->obs_no_z(), latent_for(e)));
      Tape t;
      Var val = bundle.value(t, t.input(to_tensor_rows(rows)));
      for (int e = 0; e < num_envs; ++e)
        values(T, e) = static_cast<double>(t.value(val)[static_cast<size_t>(e)]);
    }

    Eigen::VectorXd adv(T * num_envs), ret(T * num_envs);
    for (int e = 0; e < num_envs; ++e) {
      Eigen::VectorXd r_col(T), v_col(T + 1);
      std::vector<uint8_t> d_col(static_cast<size_t>(T));
      for (int s = 0; s < T; ++s) {
        r_col[s] = rewards(s, e);
        v_col[s] = values(s, e);
        d_col[static_cast<size_t>(s)] = dones[static_cast<size_t>(s * num_envs + e)];
      }
      v_col[T] = values(T, e);
      const GaeResult g =
          estimate_advantage(r_col, v_col, d_col, cfg.ppo.gamma, cfg.ppo.gae_lambda, false);
      for (int s = 0; s < T; ++s) {
        adv[s * num_envs + e] = g.raw[s];
        ret[s * num_envs + e] = g.returns[s];
      }
    }
    const double amean = adv.mean();
    const double astd = std::sqrt((adv.array() - amean).square().sum() / adv.size());
    out.adv = (adv.array() - amean) / (astd + 1e-8);
    out.ret = ret;
    mean_reward = rewards.mean();
  };

  // ----- phase 1: policy + encoder (PPO with the ROA regularizer)
  for (int update = 0; update < cfg.updates; ++update) {
    roa.lambda = cfg.rma_mode ? 0.0
                              : cfg.lambda_max *
                                    std::clamp((static_cast<double>(update) - cfg.updates * 0.5) /
                                                   (cfg.updates * 0.5),
                                               0.0, 1.0);
    const double frac_low = cfg.updates > 1 ? static_cast<double>(update) / (cfg.updates - 1) : 1.0;
    const double sched_std =
        cfg.ppo.initial_std + (cfg.ppo.final_std - cfg.ppo.initial_std) * frac_low;
    for (auto& v : bundle.policy.log_std.value.data)
      v = static_cast<Real>(std::log(sched_std));
    LowRollout roll;
    double mean_reward = 0.0;
    collect(false, roll, mean_reward);
    reward_history.push_back(mean_reward);

    const int N = static_cast<int>(roll.actions.size());
    std::vector<int> idx(static_cast<size_t>(N));
    std::iota(idx.begin(), idx.end(), 0);
    PpoStats st;
    bool stop = false;
    for (int epoch = 0; epoch < cfg.ppo.epochs && !stop; ++epoch) {
      shuffle_indices(idx, rng);
      for (int start = 0; start < N && !stop; start += cfg.ppo.minibatch) {
        const int M = std::min(cfg.ppo.minibatch, N - start);
        std::vector<Eigen::VectorXd> part1(static_cast<size_t>(M)), part3(static_cast<size_t>(M)),
            zenv(static_cast<size_t>(M)), act_mb(static_cast<size_t>(M));
        Tensor lp_old({M, 1}), adv({M, 1}), ret({M, 1});
        for (int i = 0; i < M; ++i) {
          const int k = idx[static_cast<size_t>(start + i)];
          const Eigen::VectorXd& o = roll.obs_no_z[static_cast<size_t>(k)];
          part1[static_cast<size_t>(i)] = o.head(ObsLowLayout::kExtrinsics);
          part3[static_cast<size_t>(i)] = o.tail(ObsLowLayout::kTotal - ObsLowLayout::kTiming);
          zenv[static_cast<size_t>(i)] = roll.z_env[static_cast<size_t>(k)];
          act_mb[static_cast<size_t>(i)] = roll.actions[static_cast<size_t>(k)];
          lp_old[static_cast<size_t>(i)] = static_cast<Real>(roll.logp[k]);
          adv[static_cast<size_t>(i)] = static_cast<Real>(roll.adv[k]);
          ret[static_cast<size_t>(i)] = static_cast<Real>(roll.ret[k]);
        }

        Tape t;
        Var z_mu = bundle.encoder(t, t.input(to_tensor_rows(zenv)));
        Var z_phi = bundle.adaptation(t, t.input(history_tensor(roll.history, idx, start, M)));
        Var obs_raw = t.concat_cols(t.input(to_tensor_rows(part1)),
                                    t.concat_cols(z_mu, t.input(to_tensor_rows(part3))));
        // normalize on the tape so gradients still reach the encoder
        Tensor neg_mean({ObsLowLayout::kTotal}), inv_std({ObsLowLayout::kTotal});
        for (int c = 0; c < ObsLowLayout::kTotal; ++c) {
          neg_mean[static_cast<size_t>(c)] = -bundle.obs_norm.mean.value[static_cast<size_t>(c)];
          inv_std[static_cast<size_t>(c)] = static_cast<Real>(
              1.0 / std::sqrt(static_cast<double>(bundle.obs_norm.var.value[static_cast<size_t>(c)]) + 1e-8));
        }
        Var obs_var = t.mul_rowvec(t.add_rowvec(obs_raw, t.input(neg_mean)), t.input(inv_std));

        Var mu = bundle.policy.mean(t, obs_var);
        Var logp = bundle.policy.log_prob(t, mu, to_tensor_rows(act_mb));
        Var ratio = t.exp_op(t.sub(logp, t.input(lp_old)));
        Var adv_var = t.input(adv);
        Var surr1 = t.mul(ratio, adv_var);
        Var surr2 = t.mul(t.clamp(ratio, static_cast<Real>(1.0 - cfg.ppo.clip_eps),
                                  static_cast<Real>(1.0 + cfg.ppo.clip_eps)),
                          adv_var);
        Var objective = t.mean(t.min_op(surr1, surr2));
        Var v = bundle.value(t, obs_var);
        Var v_loss = t.mean(t.square(t.sub(v, t.input(ret))));
        Var entropy = bundle.policy.entropy(t);
        Var ppo_obj = t.sub(objective, t.scale(v_loss, static_cast<Real>(cfg.ppo.value_coef)));
        ppo_obj = t.add(ppo_obj, t.scale(entropy, static_cast<Real>(cfg.ppo.entropy_coef)));
        // scale the latent regularizer to a per-sample magnitude
        Var loss = roa_loss(t, ppo_obj, t.scale(z_mu, static_cast<Real>(1.0 / M)),
                            t.scale(z_phi, static_cast<Real>(1.0 / M)), roa.lambda);
        t.backward(loss);
        opt_pi.step();
        opt_v.step();
        double kl = 0.0;
        const Tensor& lp_new = t.value(logp);
        for (int i = 0; i < lp_new.rows(); ++i)
          kl += static_cast<double>(lp_old[static_cast<size_t>(i)]) -
                static_cast<double>(lp_new[static_cast<size_t>(i)]);
        kl /= lp_new.rows();
        if (cfg.ppo.target_kl > 0.0 && kl > cfg.ppo.target_kl) stop = true;
        // adaptation parameters are not in the phase-1 optimizer; drop the
        // gradients the third term produced on them
        for (Parameter* p : [&] {
              std::vector<Parameter*> ps;
              bundle.adaptation.collect(ps);
              return ps;
            }())
          p->zero_grad();

        st.policy_loss += -static_cast<double>(t.value(objective)[0]);
        st.value_loss += static_cast<double>(t.value(v_loss)[0]);
        st.entropy = static_cast<double>(t.value(entropy)[0]);
        ++st.minibatches;
      }
    }

    // convergence criterion on the reward moving average
    if (!roa.converged && static_cast<int>(reward_history.size()) > cfg.convergence_window) {
      const size_t n = reward_history.size();
      const double first = reward_history[n - 1 - static_cast<size_t>(cfg.convergence_window)];
      const double last = reward_history[n - 1];
      const double slope = (last - first) / cfg.convergence_window;
      if (std::abs(slope) < cfg.convergence_slope) roa.converged = true;
    }
    ++roa.updates_done;
    metrics.write({{"update", static_cast<long>(update)},
                   {"phase", std::string("phase1")},
                   {"mean_reward", mean_reward},
                   {"lambda", roa.lambda},
                   {"policy_loss", st.minibatches ? st.policy_loss / st.minibatches : 0.0},
                   {"converged", roa.converged}});
    if (roa.converged && update >= cfg.updates / 2) break;
  }
  result.mean_reward_final = reward_history.empty() ? 0.0 : reward_history.back();

  // ----- phase 2: adaptation module only (policy and encoder frozen)
  roa.phase = RoaState::Phase::phase2;
  std::vector<Parameter*> phase2_params;
  bundle.adaptation.collect(phase2_params);
  AdamConfig adam2 = adam_cfg;
  adam2.lr = 1e-3;
  Adam opt2(phase2_params, adam2);

  for (int update = 0; update < cfg.phase2_updates; ++update) {
    LowRollout roll;
    double mean_reward = 0.0;
    collect(true, roll, mean_reward);  // act with the adaptation latent

    const int N = static_cast<int>(roll.actions.size());
    std::vector<int> idx(static_cast<size_t>(N));
    std::iota(idx.begin(), idx.end(), 0);
    double fit_loss = 0.0;
    int nmb = 0;
    for (int epoch = 0; epoch < cfg.ppo.epochs; ++epoch) {
      shuffle_indices(idx, rng);
      for (int start = 0; start < N; start += cfg.ppo.minibatch) {
        const int M = std::min(cfg.ppo.minibatch, N - start);
        std::vector<Eigen::VectorXd> zenv(static_cast<size_t>(M));
        for (int i = 0; i < M; ++i)
          zenv[static_cast<size_t>(i)] =
              roll.z_env[static_cast<size_t>(idx[static_cast<size_t>(start + i)])];
        Tape t;
        Var z_mu = bundle.encoder(t, t.input(to_tensor_rows(zenv)));
        Var z_phi = bundle.adaptation(t, t.input(history_tensor(roll.history, idx, start, M)));
        Var loss = t.norm2(t.sub(t.stop_gradient(z_mu), z_phi));
        loss = t.scale(loss, static_cast<Real>(1.0 / M));
        t.backward(loss);
        // encoder is frozen in phase 2
        for (Parameter* p : [&] {
              std::vector<Parameter*> ps;
              bundle.encoder.collect(ps);
              return ps;
            }())
          p->zero_grad();
        opt2.step();
        fit_loss += static_cast<double>(t.value(loss)[0]);
        ++nmb;
      }
    }
    metrics.write({{"update", static_cast<long>(update)},
                   {"phase", std::string("phase2")},
                   {"mean_reward", mean_reward},
                   {"fit_loss", nmb ? fit_loss / nmb : 0.0}});
  }
  metrics.flush();

  bundle.obs_norm.frozen = true;
  result.tracking_after = eval_low_tracking(bundle, cfg.env, cfg.eval_episodes, cfg.seed + 555);
  result.roa = roa;
  if (!cfg.out_dir.empty()) {
    result.checkpoint_path = cfg.out_dir + "/low.ckpt";
    bundle.save(result.checkpoint_path);
  }
  return result;
}

double eval_low_tracking(LowPolicyBundle& bundle, const GoalTrackConfig& env_cfg, int episodes,
                         uint64_t seed, bool use_adaptation) {
  double sum = 0.0;
  long n = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    GoalTrackConfig cfg = env_cfg;
    cfg.fixed_v_cmd = (ep % 2 == 0) ? 0.6 : -0.6;  // the extreme commands
    GoalTrackEnv env(cfg, seed + static_cast<uint64_t>(ep) * 17);
    const int steps = static_cast<int>(cfg.episode_seconds / cfg.surrogate.dt);
    for (int s = 0; s < steps; ++s) {
      Eigen::VectorXd z(kExtrinsicsDim);
      Tape t;
      Var zv;
      if (use_adaptation) {
        const Eigen::MatrixXd h = env.obs_history();
        Tensor ht({1, static_cast<int>(h.rows()), static_cast<int>(h.cols())});
        for (int f = 0; f < h.rows(); ++f)
          for (int k = 0; k < h.cols(); ++k)
            ht[static_cast<size_t>(f * h.cols() + k)] = static_cast<Real>(h(f, k));
        zv = bundle.adaptation(t, t.input(ht));
      } else {
        Tensor zt({1, kExtrinsicsDim});
        const Eigen::VectorXd ze = env.z_env();
        for (int i = 0; i < kExtrinsicsDim; ++i) zt[static_cast<size_t>(i)] = static_cast<Real>(ze[i]);
        zv = bundle.encoder(t, t.input(zt));
      }
      for (int i = 0; i < kExtrinsicsDim; ++i)
        z[i] = static_cast<double>(t.value(zv)[static_cast<size_t>(i)]);

      Eigen::VectorXd obs = env.obs_no_z();
      obs.segment(ObsLowLayout::kExtrinsics, kExtrinsicsDim) = z;
      const Eigen::VectorXd normed = bundle.obs_norm.apply(obs);
      Tensor in({1, ObsLowLayout::kTotal});
      for (int i = 0; i < ObsLowLayout::kTotal; ++i)
        in[static_cast<size_t>(i)] = static_cast<Real>(normed[i]);
      Tape t2;
      Var mu = bundle.policy.mean(t2, t2.input(in));
      Eigen::VectorXd action(12);
      for (int i = 0; i < 12; ++i)
        action[i] = static_cast<double>(t2.value(mu)[static_cast<size_t>(i)]);
      const auto sr = env.step(action);
      if (s * env_cfg.surrogate.dt > 1.0) {  // skip the spin-up transient
        sum += sr.tracking_kernel_value;
        ++n;
      }
    }
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// DAgger distillation

namespace {

struct DaggerSample {
  std::vector<float> image;
  Eigen::VectorXd aux;
  Eigen::Matrix<double, 9, 1> label;
};

Tensor images_tensor(const std::vector<DaggerSample*>& batch, int C, int H, int W) {
  const int M = static_cast<int>(batch.size());
  Tensor t({M, C, H, W});
  const size_t chw = static_cast<size_t>(C) * H * W;
  for (int i = 0; i < M; ++i)
    for (size_t k = 0; k < chw; ++k)
      t[static_cast<size_t>(i) * chw + k] = static_cast<Real>(batch[static_cast<size_t>(i)]->image[k]);
  return t;
}

}  // namespace

DistillResult distill_student(const TrainTeacherConfig& teacher_env_cfg,
                              const std::string& teacher_checkpoint, const DaggerConfig& cfg) {
  ensure_dir(cfg.out_dir);
  JsonlWriter metrics(cfg.out_dir.empty() ? "" : cfg.out_dir + "/dagger_metrics.jsonl");

  PickupEnvConfig env_cfg = teacher_env_cfg.env;
  env_cfg.vision = true;

  Rng init_rng(cfg.seed);
  PickupEnv env(env_cfg, cfg.seed * 31 + 7);
  const int C = env.student_channels();
  const int H = env_cfg.image_size, W = env_cfg.image_size;

  TeacherBundle teacher(env.privileged_obs_dim(), init_rng);
  teacher.load(teacher_checkpoint);
  teacher.obs_norm.frozen = true;

  StudentBundle student(C, H, W, 52, init_rng);
  std::vector<Parameter*> params;
  student.encoder.collect(params);
  student.head.collect(params);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.max_grad_norm = cfg.max_grad_norm;
  Adam opt(params, adam_cfg);

  Rng rng(cfg.seed + 3000);
  std::vector<DaggerSample> dataset, holdout;
  DistillResult result;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const bool teacher_driven = iter < cfg.warmup_iterations;
    int collected = 0;
    while (collected < cfg.steps_per_iteration) {
      if (env.status() != PickupStatus::ongoing) env.reset();
      StudentObs sobs = env.student_obs();
      const Eigen::VectorXd priv = env.privileged_obs();
      const Eigen::Matrix<double, 9, 1> label = teacher.mean_action(priv);

      DaggerSample sample;
      sample.image.resize(sobs.image.size());
      for (size_t i = 0; i < sobs.image.size(); ++i)
        sample.image[i] = static_cast<float>(sobs.image[i]);
      sample.aux = sobs.aux;
      sample.label = label;
      // every 8th sample goes to the held-out pool
      if (static_cast<int>(holdout.size()) < cfg.holdout && collected % 8 == 3)
        holdout.push_back(std::move(sample));
      else
        dataset.push_back(std::move(sample));

      Eigen::Matrix<double, 9, 1> act_vec;
      if (teacher_driven) {
        Eigen::VectorXd sampled(9);
        const Eigen::VectorXd mean9 = label;
        for (int i = 0; i < 9; ++i)
          sampled[i] = mean9[i] +
                       std::exp(static_cast<double>(teacher.policy.log_std.value[static_cast<size_t>(i)])) *
                           rng.gaussian();
        for (int i = 0; i < 9; ++i) act_vec[i] = sampled[i];
      } else {
        student.aux_norm.frozen = true;
        act_vec = student.act(sobs);
      }
      env.step(HighAction::from_vector(act_vec));
      ++collected;
    }

    // refresh the aux normalizer on the aggregated dataset
    if (iter == 0) {
      Tensor aux_all({static_cast<int>(dataset.size()), 52});
      for (size_t i = 0; i < dataset.size(); ++i)
        for (int c = 0; c < 52; ++c)
          aux_all[i * 52 + static_cast<size_t>(c)] = static_cast<Real>(dataset[i].aux[c]);
      student.aux_norm.update(aux_all);
      student.aux_norm.frozen = true;
    }

    // supervised regression on the aggregate (DAgger)
    std::vector<int> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), 0);
    double train_loss = 0.0;
    int nmb = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_indices(idx, rng);
      for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(cfg.minibatch)) {
        const int M = static_cast<int>(
            std::min(static_cast<size_t>(cfg.minibatch), idx.size() - start));
        std::vector<DaggerSample*> batch(static_cast<size_t>(M));
        Tensor aux({M, 52}), labels({M, 9});
        for (int i = 0; i < M; ++i) {
          DaggerSample& s = dataset[static_cast<size_t>(idx[start + static_cast<size_t>(i)])];
          batch[static_cast<size_t>(i)] = &s;
          const Eigen::VectorXd an = student.aux_norm.apply(s.aux);
          for (int c = 0; c < 52; ++c) aux[static_cast<size_t>(i * 52 + c)] = static_cast<Real>(an[c]);
          for (int c = 0; c < 9; ++c)
            labels[static_cast<size_t>(i * 9 + c)] = static_cast<Real>(s.label[c]);
        }
        Tape t;
        Var pred = student.forward(t, t.input(images_tensor(batch, C, H, W)), t.input(aux));
        Var loss = t.mean(t.square(t.sub(pred, t.input(labels))));
        t.backward(loss);
        opt.step();
        train_loss += static_cast<double>(t.value(loss)[0]);
        ++nmb;
      }
    }

    // held-out action MSE
    double mse = 0.0;
    if (!holdout.empty()) {
      for (size_t start = 0; start < holdout.size(); start += 64) {
        const int M = static_cast<int>(std::min<size_t>(64, holdout.size() - start));
        std::vector<DaggerSample*> batch(static_cast<size_t>(M));
        Tensor aux({M, 52}), labels({M, 9});
        for (int i = 0; i < M; ++i) {
          DaggerSample& s = holdout[start + static_cast<size_t>(i)];
          batch[static_cast<size_t>(i)] = &s;
          const Eigen::VectorXd an = student.aux_norm.apply(s.aux);
          for (int c = 0; c < 52; ++c) aux[static_cast<size_t>(i * 52 + c)] = static_cast<Real>(an[c]);
          for (int c = 0; c < 9; ++c)
            labels[static_cast<size_t>(i * 9 + c)] = static_cast<Real>(s.label[c]);
        }
        Tape t;
        Var pred = student.forward(t, t.input(images_tensor(batch, C, H, W)), t.input(aux));
        Var loss = t.mean(t.square(t.sub(pred, t.input(labels))));
        mse += static_cast<double>(t.value(loss)[0]) * M;
      }
      mse /= static_cast<double>(holdout.size());
    }
    result.holdout_mse.push_back(mse);
    metrics.write({{"iteration", static_cast<long>(iter)},
                   {"dataset", static_cast<long>(dataset.size())},
                   {"train_loss", nmb ? train_loss / nmb : 0.0},
                   {"holdout_mse", mse},
                   {"teacher_driven", teacher_driven}});
  }
  metrics.flush();

  // evaluations: student success, teacher success, gripper agreement
  int agree = 0, total = 0;
  for (const DaggerSample& s : holdout) {
    StudentObs sobs;
    sobs.channels = C;
    sobs.height = H;
    sobs.width = W;
    sobs.image.assign(s.image.begin(), s.image.end());
    sobs.aux = s.aux;
    const auto pred = student.act(sobs);
    if ((pred[8] > 0.5) == (s.label[8] > 0.5)) ++agree;
    ++total;
  }
  result.gripper_agreement = total ? static_cast<double>(agree) / total : 0.0;

  int s_succ = 0, t_succ = 0;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    PickupEnv seval(env_cfg, cfg.seed * 101 + 13 + static_cast<uint64_t>(ep));
    while (seval.status() == PickupStatus::ongoing && seval.high_steps() < env_cfg.max_high_steps)
      seval.step(HighAction::from_vector(student.act(seval.student_obs())));
    if (seval.status() == PickupStatus::success) ++s_succ;

    PickupEnv teval(env_cfg, cfg.seed * 101 + 13 + static_cast<uint64_t>(ep));
    while (teval.status() == PickupStatus::ongoing && teval.high_steps() < env_cfg.max_high_steps)
      teval.step(teacher.act_greedy(teval.privileged_obs()));
    if (teval.status() == PickupStatus::success) ++t_succ;
  }
  result.student_success = static_cast<double>(s_succ) / cfg.eval_episodes;
  result.teacher_success = static_cast<double>(t_succ) / cfg.eval_episodes;

  if (!cfg.out_dir.empty()) {
    result.checkpoint_path = cfg.out_dir + "/student.ckpt";
    student.save(result.checkpoint_path);
  }
  return result;
}

SyntheticDaggerResult dagger_linear_synthetic(int iterations, int steps_per_iteration, double lr,
                                              uint64_t seed) {
  const int state_dim = 8, act_dim = 4;
  Rng rng(seed);

  // fixed expert map and driven linear dynamics
  Eigen::MatrixXd W_star(state_dim, act_dim);
  for (int r = 0; r < state_dim; ++r)
    for (int c = 0; c < act_dim; ++c) W_star(r, c) = rng.gaussian();
  Eigen::MatrixXd B(act_dim, state_dim);
  for (int r = 0; r < act_dim; ++r)
    for (int c = 0; c < state_dim; ++c) B(r, c) = 0.2 * rng.gaussian();

  Rng init(seed + 1);
  Linear student("synthetic.student", state_dim, act_dim, init, 0.1);
  std::vector<Parameter*> params;
  student.collect(params);
  AdamConfig acfg;
  acfg.lr = lr;
  acfg.max_grad_norm = 0.0;
  Adam opt(params, acfg);

  auto student_act = [&](const Eigen::VectorXd& x) {
    Tensor in({1, state_dim});
    for (int i = 0; i < state_dim; ++i) in[static_cast<size_t>(i)] = static_cast<Real>(x[i]);
    Tape t;
    Var out = student(t, t.input(in));
    Eigen::VectorXd a(act_dim);
    for (int i = 0; i < act_dim; ++i) a[i] = static_cast<double>(t.value(out)[static_cast<size_t>(i)]);
    return a;
  };

  // fixed held-out set from the expert's state distribution
  std::vector<Eigen::VectorXd> ho_x;
  std::vector<Eigen::VectorXd> ho_y;
  {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(state_dim);
    for (int i = 0; i < 256; ++i) {
      for (int k = 0; k < state_dim; ++k) x[k] = rng.gaussian();
      ho_x.push_back(x);
      ho_y.push_back(W_star.transpose() * x);
    }
  }

  std::vector<Eigen::VectorXd> xs, ys;
  SyntheticDaggerResult result;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(state_dim);
  for (int k = 0; k < state_dim; ++k) x[k] = rng.gaussian();

  for (int iter = 0; iter < iterations; ++iter) {
    const bool teacher_driven = iter == 0;
    for (int s = 0; s < steps_per_iteration; ++s) {
      const Eigen::VectorXd label = W_star.transpose() * x;
      xs.push_back(x);
      ys.push_back(label);
      const Eigen::VectorXd a = teacher_driven ? label : student_act(x);
      Eigen::VectorXd noise(state_dim);
      for (int k = 0; k < state_dim; ++k) noise[k] = 0.2 * rng.gaussian();
      x = 0.82 * x + B.transpose() * a * 0.15 + noise;
    }

    // full-batch regression passes over the aggregate
    const int N = static_cast<int>(xs.size());
    Tensor X({N, state_dim}), Y({N, act_dim});
    for (int i = 0; i < N; ++i) {
      for (int c = 0; c < state_dim; ++c)
        X[static_cast<size_t>(i * state_dim + c)] = static_cast<Real>(xs[static_cast<size_t>(i)][c]);
      for (int c = 0; c < act_dim; ++c)
        Y[static_cast<size_t>(i * act_dim + c)] = static_cast<Real>(ys[static_cast<size_t>(i)][c]);
    }
    for (int pass = 0; pass < 12; ++pass) {
      Tape t;
      Var pred = student(t, t.input(X));
      Var loss = t.mean(t.square(t.sub(pred, t.input(Y))));
      t.backward(loss);
      opt.step();
    }

    double mse = 0.0;
    for (size_t i = 0; i < ho_x.size(); ++i)
      mse += (student_act(ho_x[i]) - ho_y[i]).squaredNorm();
    mse /= static_cast<double>(ho_x.size() * act_dim);
    result.holdout_mse.push_back(mse);
  }
  return result;
}

}  // namespace locoman
