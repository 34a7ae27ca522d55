#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "locoman/trainers.hpp"

using namespace locoman;

TEST_CASE("ppo surrogate analytic cases") {
  CHECK(ppo_surrogate(1.0, 2.0, 0.2) == doctest::Approx(2.0));
  CHECK(ppo_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(ppo_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
}

TEST_CASE("ppo surrogate at unit ratio averages the advantages") {
  Rng rng(3);
  Eigen::VectorXd ratio = Eigen::VectorXd::Ones(100);
  Eigen::VectorXd adv(100);
  for (int i = 0; i < 100; ++i) adv[i] = rng.gaussian();
  CHECK(ppo_surrogate(ratio, adv, 0.2) == doctest::Approx(adv.mean()).epsilon(1e-12));
}

TEST_CASE("clipping never raises the objective above the unclipped term") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double r = std::exp(rng.gaussian());
    const double a = rng.gaussian();
    CHECK(ppo_surrogate(r, a, 0.2) <= r * a + 1e-12);
  }
}

TEST_CASE("gae special cases: td residuals and returns-minus-values") {
  Rng rng(7);
  const int T = 32;
  Eigen::VectorXd rewards(T), values(T + 1);
  std::vector<uint8_t> dones(T, 0);
  for (int t = 0; t < T; ++t) rewards[t] = rng.gaussian();
  for (int t = 0; t <= T; ++t) values[t] = rng.gaussian();
  dones[20] = 1;

  const GaeResult td = estimate_advantage(rewards, values, dones, 0.97, 0.0, false);
  for (int t = 0; t < T; ++t) {
    const double not_done = dones[static_cast<size_t>(t)] ? 0.0 : 1.0;
    CHECK(td.raw[t] ==
          doctest::Approx(rewards[t] + 0.97 * values[t + 1] * not_done - values[t]).epsilon(1e-12));
  }

  const GaeResult mc = estimate_advantage(rewards, values, dones, 1.0, 1.0, false);
  // returns-minus-values: check by direct forward sums within each segment
  for (int t = 0; t < T; ++t) {
    double ret = 0.0;
    int k = t;
    while (true) {
      ret += rewards[k];
      if (dones[static_cast<size_t>(k)] || k == T - 1) break;
      ++k;
    }
    if (!dones[static_cast<size_t>(k)]) ret += values[T];
    CHECK(mc.raw[t] == doctest::Approx(ret - values[t]).epsilon(1e-10));
  }
}

TEST_CASE("gae matches the brute-force exponential sum") {
  Rng rng(11);
  const int T = 24;
  const double gamma = 0.99, lambda = 0.95;
  Eigen::VectorXd rewards(T), values(T + 1);
  std::vector<uint8_t> dones(T, 0);
  for (int t = 0; t < T; ++t) rewards[t] = rng.gaussian();
  for (int t = 0; t <= T; ++t) values[t] = rng.gaussian();
  dones[9] = 1;
  dones[17] = 1;

  const GaeResult g = estimate_advantage(rewards, values, dones, gamma, lambda, false);
  for (int t = 0; t < T; ++t) {
    double acc = 0.0, w = 1.0;
    for (int k = t; k < T; ++k) {
      const double not_done = dones[static_cast<size_t>(k)] ? 0.0 : 1.0;
      const double delta = rewards[k] + gamma * values[k + 1] * not_done - values[k];
      acc += w * delta;
      if (dones[static_cast<size_t>(k)]) break;
      w *= gamma * lambda;
    }
    CHECK(std::abs(g.raw[t] - acc) < 1e-10);
  }
}

TEST_CASE("normalized advantages have near-zero batch mean") {
  Rng rng(13);
  const int T = 128;
  Eigen::VectorXd rewards(T), values(T + 1);
  std::vector<uint8_t> dones(T, 0);
  for (int t = 0; t < T; ++t) rewards[t] = rng.uniform(-2, 5);
  for (int t = 0; t <= T; ++t) values[t] = rng.gaussian();
  const GaeResult g = estimate_advantage(rewards, values, dones, 0.99, 0.95, true);
  CHECK(std::abs(g.advantages.mean()) < 1e-8);
  const double var = (g.advantages.array() - g.advantages.mean()).square().sum() / T;
  CHECK(std::sqrt(var) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("roa loss: coincident latents reduce to the negated objective") {
  Tape t;
  Parameter z("z", Tensor({1, 4}, {Real(0.1), Real(-0.2), Real(0.3), Real(0.4)}));
  Var ppo = t.input(Tensor::scalar(Real(1.25)));
  Var z_mu = t.param(z);
  Var z_phi = t.param(z);
  Var loss = roa_loss(t, ppo, z_mu, z_phi, 0.7);
  CHECK(static_cast<double>(t.value(loss)[0]) == doctest::Approx(-1.25).epsilon(1e-12));
}

TEST_CASE("roa loss gradient routing through the stop-gradient paths") {
  Rng rng(17);
  // separate parameters for the encoder and adaptation latents
  Parameter mu("mu", Tensor({1, 20})), phi("phi", Tensor({1, 20}));
  for (auto& v : mu.value.data) v = static_cast<Real>(rng.gaussian());
  for (auto& v : phi.value.data) v = static_cast<Real>(rng.gaussian());

  const double lambda = 0.8;
  {
    // lambda term only: gradient must reach mu and be exactly zero on phi
    Tape t;
    Var term = t.scale(t.norm2(t.sub(t.param(mu), t.stop_gradient(t.param(phi)))),
                       static_cast<Real>(lambda));
    t.backward(term);
    double mu_grad = 0.0;
    for (Real g : mu.grad.data) mu_grad += std::abs(static_cast<double>(g));
    CHECK(mu_grad > 0.0);
    for (Real g : phi.grad.data) CHECK(static_cast<double>(g) == 0.0);
  }
  mu.zero_grad();
  phi.zero_grad();
  {
    // third term only: gradient must reach phi and be exactly zero on mu
    Tape t;
    Var term = t.norm2(t.sub(t.stop_gradient(t.param(mu)), t.param(phi)));
    t.backward(term);
    for (Real g : mu.grad.data) CHECK(static_cast<double>(g) == 0.0);
    double phi_grad = 0.0;
    for (Real g : phi.grad.data) phi_grad += std::abs(static_cast<double>(g));
    CHECK(phi_grad > 0.0);
  }

  // analytic gradient of lambda * ||z_mu - c||_2: lambda * (z - c)/||z - c||
  mu.zero_grad();
  phi.zero_grad();
  Tape t;
  Var full = roa_loss(t, t.input(Tensor::scalar(0)), t.param(mu), t.param(phi), lambda);
  t.backward(full);
  Eigen::VectorXd diff(20);
  for (int i = 0; i < 20; ++i)
    diff[i] = static_cast<double>(mu.value[static_cast<size_t>(i)]) -
              static_cast<double>(phi.value[static_cast<size_t>(i)]);
  const double nrm = diff.norm();
  for (int i = 0; i < 20; ++i) {
    CHECK(static_cast<double>(mu.grad[static_cast<size_t>(i)]) ==
          doctest::Approx(lambda * diff[i] / nrm).epsilon(1e-9));
    CHECK(static_cast<double>(phi.grad[static_cast<size_t>(i)]) ==
          doctest::Approx(-diff[i] / nrm).epsilon(1e-9));
  }
  CHECK_THROWS_AS(
      [&] {
        Tape t2;
        Parameter small("s", Tensor({1, 3}));
        roa_loss(t2, t2.input(Tensor::scalar(0)), t2.param(mu), t2.param(small), 0.5);
      }(),
      std::invalid_argument);
}

TEST_CASE("running norm converges to batch statistics") {
  Rng rng(23);
  RunningNorm norm("n", 4);
  Tensor batch({512, 4});
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 4; ++c)
      batch[static_cast<size_t>(r * 4 + c)] = static_cast<Real>(2.0 * c + 0.5 * rng.gaussian());
  norm.update(batch);
  norm.update(batch);
  for (int c = 0; c < 4; ++c) {
    CHECK(static_cast<double>(norm.mean.value[static_cast<size_t>(c)]) ==
          doctest::Approx(2.0 * c).epsilon(0.1));
    CHECK(static_cast<double>(norm.var.value[static_cast<size_t>(c)]) ==
          doctest::Approx(0.25).epsilon(0.2));
  }
  const Tensor applied = norm.apply(batch);
  double mean0 = 0.0;
  for (int r = 0; r < 512; ++r) mean0 += static_cast<double>(applied[static_cast<size_t>(r * 4)]);
  CHECK(std::abs(mean0 / 512) < 0.05);
}

TEST_CASE("synthetic dagger: heldout mse decreases and collapses") {
  const SyntheticDaggerResult r = dagger_linear_synthetic(12, 64, 3e-2, 7);
  REQUIRE(r.holdout_mse.size() >= 10);
  for (size_t i = 1; i < 10; ++i) CHECK(r.holdout_mse[i] < r.holdout_mse[i - 1]);
  CHECK(r.holdout_mse[9] <= 0.2 * r.holdout_mse[0]);
}

TEST_CASE("self-distillation: a clone of the teacher scores zero mse") {
  Rng rng(31);
  TeacherBundle teacher(40, rng);
  const std::string path = "/tmp/locoman_teacher_clone.ckpt";
  teacher.save(path);
  Rng rng2(77);
  TeacherBundle clone(40, rng2);
  clone.load(path);
  Rng orng(5);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd obs(40);
    for (int k = 0; k < 40; ++k) obs[k] = orng.gaussian();
    const auto a = teacher.mean_action(obs);
    const auto b = clone.mean_action(obs);
    CHECK((a - b).norm() == 0.0);
  }
}

TEST_CASE("phase-2-only training leaves the policy and encoder bit-identical") {
  TrainLowConfig cfg;
  cfg.ppo.num_envs = 2;
  cfg.ppo.rollout_steps = 16;
  cfg.ppo.minibatch = 32;
  cfg.ppo.epochs = 2;
  cfg.updates = 0;  // no phase 1
  cfg.phase2_updates = 2;
  cfg.eval_episodes = 1;
  cfg.env.episode_seconds = 2.0;
  cfg.seed = 99;
  cfg.out_dir = "/tmp/locoman_p2only";
  const TrainLowResult r = train_low(cfg);

  // reference: the bundle exactly as train_low constructs it, untouched
  Rng ref_rng(cfg.seed);
  LowPolicyBundle reference(ref_rng, cfg.ppo.initial_std);

  Rng fresh_rng(12345);
  LowPolicyBundle loaded(fresh_rng, cfg.ppo.initial_std);
  loaded.load(r.checkpoint_path);

  std::vector<Parameter*> ref_p, got_p;
  reference.policy.collect(ref_p);
  reference.encoder.collect(ref_p);
  loaded.policy.collect(got_p);
  loaded.encoder.collect(got_p);
  REQUIRE(ref_p.size() == got_p.size());
  for (size_t i = 0; i < ref_p.size(); ++i)
    for (int k = 0; k < ref_p[i]->value.size(); ++k)
      CHECK(ref_p[i]->value[static_cast<size_t>(k)] == got_p[i]->value[static_cast<size_t>(k)]);

  // the adaptation module did change
  std::vector<Parameter*> ref_a, got_a;
  reference.adaptation.collect(ref_a);
  loaded.adaptation.collect(got_a);
  double diff = 0.0;
  for (size_t i = 0; i < ref_a.size(); ++i)
    for (int k = 0; k < ref_a[i]->value.size(); ++k)
      diff += std::abs(static_cast<double>(ref_a[i]->value[static_cast<size_t>(k)]) -
                       static_cast<double>(got_a[i]->value[static_cast<size_t>(k)]));
  CHECK(diff > 0.0);
}

TEST_CASE("fixed seed reproduces the low-level checkpoint bit for bit") {
  TrainLowConfig cfg;
  cfg.ppo.num_envs = 2;
  cfg.ppo.rollout_steps = 16;
  cfg.ppo.minibatch = 32;
  cfg.ppo.epochs = 2;
  cfg.updates = 2;
  cfg.phase2_updates = 1;
  cfg.eval_episodes = 1;
  cfg.env.episode_seconds = 2.0;
  cfg.seed = 5;

  cfg.out_dir = "/tmp/locoman_det_a";
  train_low(cfg);
  cfg.out_dir = "/tmp/locoman_det_b";
  train_low(cfg);

  std::ifstream a("/tmp/locoman_det_a/low.ckpt", std::ios::binary);
  std::ifstream b("/tmp/locoman_det_b/low.ckpt", std::ios::binary);
  const std::string ca((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  const std::string cb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  REQUIRE(ca.size() > 1000);
  CHECK(ca == cb);
}

TEST_CASE("action delay: cross-correlation of emitted and applied peaks at lag 1") {
  PickupEnvConfig cfg;
  cfg.fixed_table_height = 0.3;
  PickupEnv env(cfg, 7);
  Rng rng(13);
  for (int t = 0; t < 200; ++t) {
    HighAction a;
    for (int i = 0; i < 6; ++i) a.dpose[i] = rng.gaussian();
    a.velocity = {rng.gaussian(), rng.gaussian()};
    a.gripper_close = rng.bernoulli(0.15);
    env.step(a);
    if (env.status() != PickupStatus::ongoing) env.reset();
  }
  const auto& emitted = env.emitted_log();
  const auto& applied = env.applied_log();
  REQUIRE(emitted.size() == applied.size());
  auto corr_at_lag = [&](int lag) {
    double acc = 0.0;
    int n = 0;
    for (size_t t = static_cast<size_t>(lag); t < applied.size(); ++t) {
      acc += applied[t].dot(emitted[t - static_cast<size_t>(lag)]);
      ++n;
    }
    return acc / n;
  };
  const double c0 = corr_at_lag(0), c1 = corr_at_lag(1), c2 = corr_at_lag(2);
  CHECK(c1 > c0);
  CHECK(c1 > c2);
}
