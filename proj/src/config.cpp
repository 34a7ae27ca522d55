#include "locoman/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "locoman/metrics.hpp"

namespace locoman {

namespace {

const std::vector<RunConfig::KeySpec>& schema_impl() {
  using T = ConfigType;
  static const std::vector<RunConfig::KeySpec> keys = {
      {"run.seed", T::integer, "1", "master seed for the run"},
      {"run.out", T::text, "runs/out", "output directory"},

      {"gait.frequency", T::real, "2", "stepping frequency, Hz"},
      {"gait.duty", T::real, "0.5", "stance duty factor in (0,1)"},

      {"goals.t_traj", T::real, "2", "goal-trajectory duration, seconds"},
      {"goals.origin_height", T::real, "0.55", "invariant-frame origin height, m"},

      {"rewards.positive_progress", T::boolean, "false",
       "stage terms reward improvement instead of the verbatim min(.,0)"},
      {"rewards.sigma_cf", T::real, "100", "swing-force kernel scale, N^2"},
      {"rewards.sigma_cv", T::real, "1", "stance-velocity kernel scale, (m/s)^2"},
      {"rewards.base_height_target", T::real, "0.5", "base height target, m"},

      {"env.table_height", T::real, "-1", "fixed table height, m; -1 draws from the range"},
      {"env.object", T::text, "sphere", "object primitive: sphere, box or cylinder"},
      {"env.object_size", T::real, "0.035", "object size parameter, m"},
      {"env.start_distance", T::real, "1", "robot start distance from the table, m"},
      {"env.max_high_steps", T::integer, "150", "episode budget in high-level steps"},
      {"env.grasp_radius", T::real, "0.04", "kinematic attach radius, m"},
      {"env.teleport_prob", T::real, "0.1", "object teleport probability per failed grasp"},
      {"env.action_delay", T::boolean, "true", "one-step action delay"},
      {"env.forcing_stop", T::boolean, "true", "zero the velocity command while closing"},
      {"env.vision", T::boolean, "false", "render student observations"},
      {"env.image_size", T::integer, "32", "camera resolution (square)"},
      {"env.frame_stack", T::integer, "4", "stacked depth frames"},
      {"env.shape_latent", T::integer, "64", "shape-feature latent size"},

      {"rand.friction_min", T::real, "0.4", "friction range low"},
      {"rand.friction_max", T::real, "1.25", "friction range high"},
      {"rand.calls_min", T::integer, "6", "low-level calls per high-level call, low"},
      {"rand.calls_max", T::integer, "8", "low-level calls per high-level call, high"},
      {"rand.latency_min", T::integer, "0", "camera latency, low (low-level steps)"},
      {"rand.latency_max", T::integer, "2", "camera latency, high"},
      {"rand.table_min", T::real, "0", "table height range low, m"},
      {"rand.table_max", T::real, "0.5", "table height range high, m"},

      {"ppo.lr", T::real, "0.0003", "Adam learning rate"},
      {"ppo.clip_eps", T::real, "0.2", "PPO clip epsilon"},
      {"ppo.gamma", T::real, "0.99", "discount"},
      {"ppo.gae_lambda", T::real, "0.95", "advantage-estimation lambda"},
      {"ppo.epochs", T::integer, "5", "optimization epochs per batch"},
      {"ppo.minibatch", T::integer, "256", "minibatch size"},
      {"ppo.rollout_steps", T::integer, "64", "rollout length per env per update"},
      {"ppo.num_envs", T::integer, "16", "parallel environment instances"},
      {"ppo.entropy_coef", T::real, "0.002", "entropy bonus coefficient"},
      {"ppo.value_coef", T::real, "0.5", "value-loss coefficient"},
      {"ppo.max_grad_norm", T::real, "1", "gradient clip (global norm); <=0 off"},
      {"ppo.initial_std", T::real, "0.5", "initial policy standard deviation"},

      {"train.updates", T::integer, "160", "PPO updates (phase 1 for the low level)"},
      {"train.phase2_updates", T::integer, "40", "adaptation-fitting updates"},
      {"train.lambda_max", T::real, "1", "final ROA multiplier"},
      {"train.rma_mode", T::boolean, "false", "hold the ROA multiplier at zero"},
      {"train.clip_start", T::real, "0.6", "velocity clip at curriculum start, m/s"},
      {"train.clip_end", T::real, "0.35", "velocity clip at curriculum end, m/s"},
      {"train.cmd_activate", T::real, "0.5", "success EMA that arms the command penalty"},
      {"train.near_start_init", T::real, "0.7", "initial near-table spawn probability"},
      {"train.near_start_gone", T::real, "0.6", "budget fraction by which near starts end"},
      {"train.eval_episodes", T::integer, "32", "greedy evaluation episodes"},

      {"dagger.warmup", T::integer, "2", "teacher-sampled iterations"},
      {"dagger.iterations", T::integer, "10", "total DAgger iterations"},
      {"dagger.steps", T::integer, "256", "env steps collected per iteration"},
      {"dagger.epochs", T::integer, "3", "regression epochs per iteration"},
      {"dagger.minibatch", T::integer, "64", "regression minibatch"},
      {"dagger.lr", T::real, "0.001", "student learning rate"},
      {"dagger.holdout", T::integer, "256", "held-out transitions for the eval MSE"},
      {"dagger.eval_episodes", T::integer, "16", "success-rate evaluation episodes"},

      {"harness.duration", T::real, "10", "virtual-time run length, seconds"},
      {"harness.proc_min", T::real, "0.121", "server processing time, low, s"},
      {"harness.proc_max", T::real, "0.159", "server processing time, high, s"},
      {"harness.request_jitter", T::real, "0", "request-channel latency jitter, s"},
      {"harness.response_jitter", T::real, "0", "response-channel latency jitter, s"},

      {"ikbench.samples", T::integer, "500", "sampled goals for the reach benchmark"},
      {"ikbench.track_seconds", T::real, "8", "tracking-run length per episode, s"},
      {"ikbench.episodes", T::integer, "8", "tracking episodes"},
      {"eval.episodes", T::integer, "32", "episodes for the eval command"},
      {"eval.checkpoint", T::text, "", "policy checkpoint to evaluate"},
  };
  return keys;
}

const RunConfig::KeySpec* find_key(const std::string& name) {
  for (const auto& k : schema_impl())
    if (k.name == name) return &k;
  return nullptr;
}

std::string canonical_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<RunConfig::KeySpec>& RunConfig::schema() { return schema_impl(); }

RunConfig::RunConfig() {
  for (const auto& k : schema_impl()) values_[k.name] = k.default_value;
  // canonicalize defaults through set() so serialization is stable
  for (const auto& k : schema_impl()) set(k.name, k.default_value);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key '" + key + "'");
  const std::string v = trim(value);
  switch (spec->type) {
    case ConfigType::real: {
      try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        values_[key] = canonical_real(d);
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects a real number, got '" + v + "'");
      }
      break;
    }
    case ConfigType::integer: {
      try {
        size_t pos = 0;
        const long n = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        values_[key] = std::to_string(n);
      } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
      }
      break;
    }
    case ConfigType::boolean: {
      if (v == "true" || v == "1" || v == "yes")
        values_[key] = "true";
      else if (v == "false" || v == "0" || v == "no")
        values_[key] = "false";
      else
        throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
      break;
    }
    case ConfigType::text:
      values_[key] = v;
      break;
  }
}

void RunConfig::apply_override(const std::string& kv) {
  const size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value, got '" + kv + "'");
  set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
}

double RunConfig::real(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec || spec->type != ConfigType::real)
    throw ConfigError("'" + key + "' is not a real-valued key");
  return std::stod(values_.at(key));
}

long RunConfig::integer(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec || spec->type != ConfigType::integer)
    throw ConfigError("'" + key + "' is not an integer key");
  return std::stol(values_.at(key));
}

bool RunConfig::boolean(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec || spec->type != ConfigType::boolean)
    throw ConfigError("'" + key + "' is not a boolean key");
  return values_.at(key) == "true";
}

const std::string& RunConfig::text(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec || spec->type != ConfigType::text)
    throw ConfigError("'" + key + "' is not a text key");
  return values_.at(key);
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : values_) {  // std::map: sorted
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    try {
      cfg.set(trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file '" + path + "'");
  out << serialize();
}

uint64_t RunConfig::hash() const {
  const std::string s = serialize();
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const std::string& out_dir, const RunConfig& config, uint64_t seed,
                    const std::string& command) {
  std::filesystem::create_directories(out_dir);
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(config.hash()));
  MetricRow row{{"command", command},
                {"config_hash", std::string(hash_hex)},
                {"code_version", std::string(kCodeVersion)},
                {"seed", static_cast<long>(seed)}};
  std::ofstream out(out_dir + "/manifest.json");
  if (!out) throw ConfigError("cannot write manifest in '" + out_dir + "'");
  out << to_json_line(row) << "\n";
  config.save(out_dir + "/config.txt");
}

}  // namespace locoman
