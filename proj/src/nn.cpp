#include "locoman/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>

namespace locoman {

Tensor orthogonal_init(int rows, int cols, double gain, Rng& rng) {
  const int n = std::max(rows, cols);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  Eigen::MatrixXd Q = qr.householderQ();
  // Fix signs so the decomposition is unique given the input.
  Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i)
    if (R(i, i) < 0) Q.col(i) = -Q.col(i);

  Tensor t({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      t[static_cast<size_t>(r * cols + c)] = static_cast<Real>(gain * Q(r, c));
  return t;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng, double gain)
    : W(name + ".W", Tensor({in, out})), b(name + ".b", Tensor({out})) {
  W.value = orthogonal_init(in, out, gain, rng);
}

Var Linear::operator()(Tape& t, Var x) {
  return t.add_rowvec(t.matmul(x, t.param(W)), t.param(b));
}

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

Mlp::Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, Rng& rng,
         double gain) {
  int prev = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    layers.emplace_back(name + ".l" + std::to_string(i), prev, hidden[i], rng, gain);
    prev = hidden[i];
  }
  layers.emplace_back(name + ".l" + std::to_string(hidden.size()), prev, out, rng, gain);
}

Var Mlp::operator()(Tape& t, Var x) {
  for (size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](t, x);
    if (i + 1 < layers.size()) x = t.elu(x);
  }
  return x;
}

void Mlp::collect(std::vector<Parameter*>& out) {
  for (auto& l : layers) l.collect(out);
}

Conv1dLayer::Conv1dLayer(const std::string& name, int c_in, int c_out, int k, int stride_,
                         Rng& rng)
    : W(name + ".W", Tensor({c_out, c_in, k})), b(name + ".b", Tensor({c_out})), stride(stride_) {
  const Tensor flat = orthogonal_init(c_out, c_in * k, 1.0, rng);
  W.value.data = flat.data;
}

Var Conv1dLayer::operator()(Tape& t, Var x) {
  return t.conv1d(x, t.param(W), t.param(b), stride);
}

void Conv1dLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

Conv2dLayer::Conv2dLayer(const std::string& name, int c_in, int c_out, int k, int stride_,
                         Rng& rng)
    : W(name + ".W", Tensor({c_out, c_in, k, k})), b(name + ".b", Tensor({c_out})),
      stride(stride_) {
  const Tensor flat = orthogonal_init(c_out, c_in * k * k, 1.0, rng);
  W.value.data = flat.data;
}

Var Conv2dLayer::operator()(Tape& t, Var x) {
  return t.conv2d(x, t.param(W), t.param(b), stride);
}

void Conv2dLayer::collect(std::vector<Parameter*>& out) {
  out.push_back(&W);
  out.push_back(&b);
}

GaussianPolicy::GaussianPolicy(const std::string& name, int obs_dim,
                               const std::vector<int>& hidden, int act_dim_, Rng& rng,
                               double initial_std)
    : trunk(name + ".actor", obs_dim, hidden, act_dim_, rng),
      log_std(name + ".log_std", Tensor({act_dim_})), act_dim(act_dim_) {
  for (auto& v : log_std.value.data) v = static_cast<Real>(std::log(initial_std));
}

Var GaussianPolicy::mean(Tape& t, Var obs) { return trunk(t, obs); }

Var GaussianPolicy::log_prob(Tape& t, Var mean_var, const Tensor& actions) {
  const int B = t.value(mean_var).rows();
  if (actions.rows() != B || actions.cols() != act_dim)
    throw std::invalid_argument("log_prob: action batch shape mismatch");
  Var ls = t.param(log_std);
  Var inv_std = t.exp_op(t.neg(ls));                       // [A]
  Var diff = t.sub(t.input(actions), mean_var);            // [B,A]
  Var z = t.mul_rowvec(diff, inv_std);                     // [B,A]
  Var quad = t.scale(t.sum_cols(t.square(z)), Real(-0.5)); // [B,1]
  Var log_det = t.scale(t.sum(ls), Real(-1));              // scalar [1]
  Var lp = t.add_rowvec(quad, log_det);                    // broadcast the scalar
  return t.add_const(lp, static_cast<Real>(-0.5 * act_dim * std::log(2.0 * M_PI)));
}

Var GaussianPolicy::entropy(Tape& t) {
  Var ls = t.param(log_std);
  return t.add_const(t.sum(ls), static_cast<Real>(0.5 * act_dim * std::log(2.0 * M_PI * M_E)));
}

std::vector<Real> GaussianPolicy::sample(const std::vector<Real>& mean_row, Rng& rng) const {
  std::vector<Real> a(mean_row.size());
  for (size_t i = 0; i < a.size(); ++i)
    a[i] = mean_row[i] + static_cast<Real>(std::exp(log_std.value[i]) * rng.gaussian());
  return a;
}

void GaussianPolicy::collect(std::vector<Parameter*>& out) {
  trunk.collect(out);
  out.push_back(&log_std);
}

ValueNet::ValueNet(const std::string& name, int obs_dim, const std::vector<int>& hidden, Rng& rng)
    : trunk(name + ".critic", obs_dim, hidden, 1, rng) {}

AdaptationNet::AdaptationNet(const std::string& name, int feat_dim_, int latent_dim, int history_,
                             Rng& rng)
    : history(history_), feat_dim(feat_dim_) {
  conv1 = Conv1dLayer(name + ".conv1", feat_dim_, 32, 5, 2, rng);
  const int t1 = (history_ - 5) / 2 + 1;
  conv2 = Conv1dLayer(name + ".conv2", 32, 32, 3, 2, rng);
  const int t2 = (t1 - 3) / 2 + 1;
  head = Linear(name + ".head", 32 * t2, latent_dim, rng);
}

Var AdaptationNet::operator()(Tape& t, Var x) {
  const Tensor& vx = t.value(x);
  if (vx.shape.size() != 3 || vx.shape[1] != feat_dim || vx.shape[2] != history)
    throw std::invalid_argument("AdaptationNet: expected [B, feat, history] input");
  const int B = vx.shape[0];
  Var h = t.elu(conv1(t, x));
  h = t.elu(conv2(t, h));
  const auto& hs = t.value(h).shape;
  h = t.reshape(h, {B, hs[1] * hs[2]});
  return head(t, h);
}

void AdaptationNet::collect(std::vector<Parameter*>& out) {
  conv1.collect(out);
  conv2.collect(out);
  head.collect(out);
}

StudentEncoder::StudentEncoder(const std::string& name, int channels_, int height_, int width_,
                               Rng& rng)
    : channels(channels_), height(height_), width(width_) {
  conv1 = Conv2dLayer(name + ".conv1", channels_, 8, 5, 2, rng);
  const int h1 = (height_ - 5) / 2 + 1, w1 = (width_ - 5) / 2 + 1;
  conv2 = Conv2dLayer(name + ".conv2", 8, 16, 3, 2, rng);
  const int h2 = (h1 - 3) / 2 + 1, w2 = (w1 - 3) / 2 + 1;
  head = Linear(name + ".head", 16 * h2 * w2, 64, rng);
}

Var StudentEncoder::operator()(Tape& t, Var images) {
  const Tensor& vx = t.value(images);
  if (vx.shape.size() != 4 || vx.shape[1] != channels || vx.shape[2] != height ||
      vx.shape[3] != width)
    throw std::invalid_argument("StudentEncoder: unexpected image shape");
  const int B = vx.shape[0];
  Var h = t.elu(conv1(t, images));
  h = t.elu(conv2(t, h));
  const auto& hs = t.value(h).shape;
  h = t.reshape(h, {B, hs[1] * hs[2] * hs[3]});
  return t.elu(head(t, h));
}

void StudentEncoder::collect(std::vector<Parameter*>& out) {
  conv1.collect(out);
  conv2.collect(out);
  head.collect(out);
}

// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Parameter* p : params_) {
    m_.push_back(Tensor::zeros(p->value.shape));
    v_.push_back(Tensor::zeros(p->value.shape));
  }
}

double Adam::step() {
  double norm2 = 0.0;
  for (Parameter* p : params_)
    for (Real g : p->grad.data) norm2 += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(norm2);
  double clip = 1.0;
  if (cfg_.max_grad_norm > 0.0 && norm > cfg_.max_grad_norm) clip = cfg_.max_grad_norm / norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter* p = params_[pi];
    Tensor& m = m_[pi];
    Tensor& v = v_[pi];
    for (int i = 0; i < p->value.size(); ++i) {
      const double g = static_cast<double>(p->grad[static_cast<size_t>(i)]) * clip;
      const double mi = cfg_.beta1 * static_cast<double>(m[static_cast<size_t>(i)]) +
                        (1.0 - cfg_.beta1) * g;
      const double vi = cfg_.beta2 * static_cast<double>(v[static_cast<size_t>(i)]) +
                        (1.0 - cfg_.beta2) * g * g;
      m[static_cast<size_t>(i)] = static_cast<Real>(mi);
      v[static_cast<size_t>(i)] = static_cast<Real>(vi);
      const double update = cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      p->value[static_cast<size_t>(i)] -= static_cast<Real>(update);
    }
    p->zero_grad();
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Checkpoint IO

namespace {

void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(buf[pos++]);
  }
  uint16_t u16() {
    need(2);
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos++])) << (8 * i);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeF64 = 1;
constexpr uint8_t kDtypeNative = sizeof(Real) == 4 ? kDtypeF32 : kDtypeF64;

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<Parameter*>& params) {
  std::string header = "VBCK";
  put_u8(header, 1);  // version
  put_u32(header, static_cast<uint32_t>(params.size()));

  std::string payload;
  std::string table;
  for (const Parameter* p : params) {
    put_u16(table, static_cast<uint16_t>(p->name.size()));
    table += p->name;
    put_u8(table, kDtypeNative);
    put_u8(table, static_cast<uint8_t>(p->value.shape.size()));
    for (int d : p->value.shape) put_u32(table, static_cast<uint32_t>(d));
    put_u64(table, payload.size());
    for (Real v : p->value.data) {
      if constexpr (sizeof(Real) == 8) {
        uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(payload, bits);
      } else {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(payload, bits);
      }
    }
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << header << table << payload;
}

std::map<std::string, Tensor> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(buf);
  if (r.bytes(4) != "VBCK") throw std::runtime_error("checkpoint: bad magic");
  const uint8_t version = r.u8();
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  const uint32_t count = r.u32();

  struct Entry {
    std::string name;
    uint8_t dtype;
    std::vector<int> shape;
    uint64_t offset;
  };
  std::vector<Entry> entries;
  for (uint32_t i = 0; i < count; ++i) {
    Entry e;
    const uint16_t len = r.u16();
    e.name = r.bytes(len);
    e.dtype = r.u8();
    const uint8_t ndim = r.u8();
    for (uint8_t d = 0; d < ndim; ++d) e.shape.push_back(static_cast<int>(r.u32()));
    e.offset = r.u64();
    entries.push_back(std::move(e));
  }
  const size_t payload_start = r.pos;

  std::map<std::string, Tensor> out;
  for (const Entry& e : entries) {
    Tensor t(e.shape);
    const size_t width = e.dtype == kDtypeF64 ? 8 : 4;
    size_t pos = payload_start + e.offset;
    if (pos + width * t.data.size() > buf.size())
      throw std::runtime_error("checkpoint: payload out of range for " + e.name);
    for (auto& v : t.data) {
      if (e.dtype == kDtypeF64) {
        uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
          bits |= static_cast<uint64_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(k)]))
                  << (8 * k);
        double d;
        std::memcpy(&d, &bits, 8);
        v = static_cast<Real>(d);
      } else {
        uint32_t bits = 0;
        for (int k = 0; k < 4; ++k)
          bits |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + static_cast<size_t>(k)]))
                  << (8 * k);
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<Real>(f);
      }
      pos += width;
    }
    out.emplace(e.name, std::move(t));
  }
  return out;
}

void assign_checkpoint(const std::vector<Parameter*>& params,
                       const std::map<std::string, Tensor>& tensors) {
  for (Parameter* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw std::runtime_error("assign_checkpoint: missing tensor " + p->name);
    if (it->second.shape != p->value.shape)
      throw std::runtime_error("assign_checkpoint: shape mismatch for " + p->name);
    p->value = it->second;
  }
}

}  // namespace locoman
