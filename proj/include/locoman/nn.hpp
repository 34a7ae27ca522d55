#pragma once

#include <map>
#include <string>
#include <vector>

#include "locoman/autodiff.hpp"
#include "locoman/rng.hpp"

namespace locoman {

/// Orthogonal weight init (QR of a Gaussian matrix), gain 1.0 by default.
Tensor orthogonal_init(int rows, int cols, double gain, Rng& rng);

struct Linear {
  Parameter W;  // [in, out]
  Parameter b;  // [out]

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng, double gain = 1.0);
  Var operator()(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);
};

/// MLP with ELU activations between layers and a linear output layer.
struct Mlp {
  std::vector<Linear> layers;

  Mlp() = default;
  Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, Rng& rng,
      double gain = 1.0);
  Var operator()(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct Conv1dLayer {
  Parameter W;  // [Co, C, K]
  Parameter b;  // [Co]
  int stride = 1;

  Conv1dLayer() = default;
  Conv1dLayer(const std::string& name, int c_in, int c_out, int k, int stride, Rng& rng);
  Var operator()(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);
};

struct Conv2dLayer {
  Parameter W;  // [Co, C, K, K]
  Parameter b;  // [Co]
  int stride = 1;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& name, int c_in, int c_out, int k, int stride, Rng& rng);
  Var operator()(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);
};

/// Diagonal-Gaussian actor: MLP mean plus a state-independent log-std vector.
struct GaussianPolicy {
  Mlp trunk;
  Parameter log_std;  // [act_dim]
  int act_dim = 0;

  GaussianPolicy() = default;
  GaussianPolicy(const std::string& name, int obs_dim, const std::vector<int>& hidden,
                 int act_dim, Rng& rng, double initial_std = 0.5);
  Var mean(Tape& t, Var obs);
  /// log pi(a|s) per row, shape [B,1]. actions is data (no gradient).
  Var log_prob(Tape& t, Var mean_var, const Tensor& actions);
  /// Entropy of the Gaussian (state independent), scalar var.
  Var entropy(Tape& t);
  /// Sample an action row using the current mean and std (no tape needed).
  std::vector<Real> sample(const std::vector<Real>& mean_row, Rng& rng) const;
  void collect(std::vector<Parameter*>& out);
};

/// Mirrors a policy trunk with a scalar head.
struct ValueNet {
  Mlp trunk;
  ValueNet() = default;
  ValueNet(const std::string& name, int obs_dim, const std::vector<int>& hidden, Rng& rng);
  Var operator()(Tape& t, Var obs) { return trunk(t, obs); }
  void collect(std::vector<Parameter*>& out) { trunk.collect(out); }
};

/// Privileged-extrinsics encoder: 2x64 MLP onto the 20-dim latent.
struct EncoderNet {
  Mlp net;
  EncoderNet() = default;
  EncoderNet(const std::string& name, int in_dim, int latent_dim, Rng& rng)
      : net(name, in_dim, {64, 64}, latent_dim, rng) {}
  Var operator()(Tape& t, Var e) { return net(t, e); }
  void collect(std::vector<Parameter*>& out) { net.collect(out); }
};

/// History-based adaptation module: two temporal convolutions over the
/// recent observation history, then a linear projection to the latent.
struct AdaptationNet {
  Conv1dLayer conv1, conv2;
  Linear head;
  int history = 25;
  int feat_dim = 0;

  AdaptationNet() = default;
  AdaptationNet(const std::string& name, int feat_dim, int latent_dim, int history, Rng& rng);
  /// x: [B, feat_dim, history]
  Var operator()(Tape& t, Var x);
  void collect(std::vector<Parameter*>& out);
};

/// Student visual encoder: conv k5 then k3, flattened to a 64-dim latent.
struct StudentEncoder {
  Conv2dLayer conv1, conv2;
  Linear head;
  int channels = 0, height = 0, width = 0;

  StudentEncoder() = default;
  StudentEncoder(const std::string& name, int channels, int height, int width, Rng& rng);
  Var operator()(Tape& t, Var images);  // [B, C, H, W] -> [B, 64]
  void collect(std::vector<Parameter*>& out);
};

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 1.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig cfg);
  /// Clip gradients (global norm), apply one update, zero the gradients.
  /// Returns the pre-clip gradient norm.
  double step();
  const std::vector<Parameter*>& params() const { return params_; }
  AdamConfig& config() { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoint IO (magic "VBCK"): named-tensor table + little-endian payload.

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params);
std::map<std::string, Tensor> load_checkpoint(const std::string& path);
/// Assign loaded tensors into parameters by name; throws on missing names or
/// shape mismatches.
void assign_checkpoint(const std::vector<Parameter*>& params,
                       const std::map<std::string, Tensor>& tensors);

}  // namespace locoman
