#include "locoman/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace locoman {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var Tape::push(Tensor value, std::function<void()> backprop, Parameter* bound) {
  Node n;
  n.grad = Tensor::zeros(value.shape);
  n.value = std::move(value);
  n.backprop = std::move(backprop);
  n.bound = bound;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::clear() { nodes_.clear(); }

Var Tape::input(Tensor value) { return push(std::move(value)); }

Var Tape::param(Parameter& p) { return push(p.value, nullptr, &p); }

Var Tape::add(Var a, Var b) {
  check_same_shape(value(a), value(b), "add");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < out.size(); ++i) out[static_cast<size_t>(i)] += vb[static_cast<size_t>(i)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    for (int i = 0; i < g.size(); ++i) {
      ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
      gb[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::sub(Var a, Var b) {
  check_same_shape(value(a), value(b), "sub");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < out.size(); ++i) out[static_cast<size_t>(i)] -= vb[static_cast<size_t>(i)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    for (int i = 0; i < g.size(); ++i) {
      ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
      gb[static_cast<size_t>(i)] -= g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::mul(Var a, Var b) {
  check_same_shape(value(a), value(b), "mul");
  Tensor out = value(a);
  const Tensor& vb = value(b);
  for (int i = 0; i < out.size(); ++i) out[static_cast<size_t>(i)] *= vb[static_cast<size_t>(i)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& va = node(a).value;
    const Tensor& vb2 = node(b).value;
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    for (int i = 0; i < g.size(); ++i) {
      ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * vb2[static_cast<size_t>(i)];
      gb[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] * va[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::add_rowvec(Var a, Var v) {
  const Tensor& va = value(a);
  const Tensor& vv = value(v);
  const int m = va.rows(), n = va.cols();
  if (vv.size() != n) throw std::invalid_argument("add_rowvec: vector length != cols");
  Tensor out = va;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out[static_cast<size_t>(r * n + c)] += vv[static_cast<size_t>(c)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, v, o, m, n]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    Tensor& gv = node(v).grad;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) {
        ga[static_cast<size_t>(r * n + c)] += g[static_cast<size_t>(r * n + c)];
        gv[static_cast<size_t>(c)] += g[static_cast<size_t>(r * n + c)];
      }
  };
  return o;
}

Var Tape::mul_rowvec(Var a, Var v) {
  const Tensor& va = value(a);
  const Tensor& vv = value(v);
  const int m = va.rows(), n = va.cols();
  if (vv.size() != n) throw std::invalid_argument("mul_rowvec: vector length != cols");
  Tensor out = va;
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out[static_cast<size_t>(r * n + c)] *= vv[static_cast<size_t>(c)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, v, o, m, n]() {
    const Tensor& g = node(o).grad;
    const Tensor& va2 = node(a).value;
    const Tensor& vv2 = node(v).value;
    Tensor& ga = node(a).grad;
    Tensor& gv = node(v).grad;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) {
        ga[static_cast<size_t>(r * n + c)] +=
            g[static_cast<size_t>(r * n + c)] * vv2[static_cast<size_t>(c)];
        gv[static_cast<size_t>(c)] +=
            g[static_cast<size_t>(r * n + c)] * va2[static_cast<size_t>(r * n + c)];
      }
  };
  return o;
}

Var Tape::scale(Var a, Real s) {
  Tensor out = value(a);
  for (auto& x : out.data) x *= s;
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o, s]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) ga[static_cast<size_t>(i)] += s * g[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::add_const(Var a, Real c) {
  Tensor out = value(a);
  for (auto& x : out.data) x += c;
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  const int m = va.rows(), k = va.cols(), k2 = vb.rows(), n = vb.cols();
  if (k != k2) throw std::invalid_argument("matmul: inner dimensions differ");
  Tensor out({m, n});
  {
    ConstMatMap A(va.data.data(), m, k), B(vb.data.data(), k, n);
    MatMap O(out.data.data(), m, n);
    O.noalias() = A * B;
  }
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o, m, k, n]() {
    ConstMatMap G(node(o).grad.data.data(), m, n);
    ConstMatMap A(node(a).value.data.data(), m, k);
    ConstMatMap B(node(b).value.data.data(), k, n);
    MatMap GA(node(a).grad.data.data(), m, k);
    MatMap GB(node(b).grad.data.data(), k, n);
    GA.noalias() += G * B.transpose();
    GB.noalias() += A.transpose() * G;
  };
  return o;
}

Var Tape::elu(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = x > Real(0) ? x : std::expm1(x);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& va = node(a).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) {
      const Real x = va[static_cast<size_t>(i)];
      const Real d = x > Real(0) ? Real(1) : std::exp(x);
      ga[static_cast<size_t>(i)] += d * g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::tanh_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::tanh(x);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& vo = node(o).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) {
      const Real y = vo[static_cast<size_t>(i)];
      ga[static_cast<size_t>(i)] += (Real(1) - y * y) * g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::exp_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::exp(x);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& vo = node(o).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i)
      ga[static_cast<size_t>(i)] += vo[static_cast<size_t>(i)] * g[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::log_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::log(x);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& va = node(a).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i)
      ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)] / va[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::square(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = x * x;
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& va = node(a).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i)
      ga[static_cast<size_t>(i)] += Real(2) * va[static_cast<size_t>(i)] * g[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::sum(Var a) {
  Real s = 0;
  for (Real x : value(a).data) s += x;
  Var o = push(Tensor::scalar(s));
  node(o).backprop = [this, a, o]() {
    const Real g = node(o).grad[0];
    Tensor& ga = node(a).grad;
    for (auto& x : ga.data) x += g;
  };
  return o;
}

Var Tape::mean(Var a) {
  const int n = value(a).size();
  Real s = 0;
  for (Real x : value(a).data) s += x;
  Var o = push(Tensor::scalar(s / Real(n)));
  node(o).backprop = [this, a, o, n]() {
    const Real g = node(o).grad[0] / Real(n);
    Tensor& ga = node(a).grad;
    for (auto& x : ga.data) x += g;
  };
  return o;
}

Var Tape::sum_cols(Var a) {
  const Tensor& va = value(a);
  const int m = va.rows(), n = va.cols();
  Tensor out({m, 1});
  for (int r = 0; r < m; ++r) {
    Real s = 0;
    for (int c = 0; c < n; ++c) s += va[static_cast<size_t>(r * n + c)];
    out[static_cast<size_t>(r)] = s;
  }
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o, m, n]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c)
        ga[static_cast<size_t>(r * n + c)] += g[static_cast<size_t>(r)];
  };
  return o;
}

Var Tape::norm2(Var a) {
  Real s = 0;
  for (Real x : value(a).data) s += x * x;
  const Real nrm = std::sqrt(s);
  Var o = push(Tensor::scalar(nrm));
  node(o).backprop = [this, a, o, nrm]() {
    if (nrm < Real(1e-12)) return;  // subgradient 0 at the origin
    const Real g = node(o).grad[0];
    const Tensor& va = node(a).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < va.size(); ++i)
      ga[static_cast<size_t>(i)] += g * va[static_cast<size_t>(i)] / nrm;
  };
  return o;
}

Var Tape::min_op(Var a, Var b) {
  check_same_shape(value(a), value(b), "min");
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  Tensor out = va;
  for (int i = 0; i < out.size(); ++i)
    out[static_cast<size_t>(i)] = std::min(va[static_cast<size_t>(i)], vb[static_cast<size_t>(i)]);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o]() {
    const Tensor& g = node(o).grad;
    const Tensor& va2 = node(a).value;
    const Tensor& vb2 = node(b).value;
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    for (int i = 0; i < g.size(); ++i) {
      if (va2[static_cast<size_t>(i)] <= vb2[static_cast<size_t>(i)])
        ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
      else
        gb[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::clamp(Var a, Real lo, Real hi) {
  const Tensor& va = value(a);
  Tensor out = va;
  for (auto& x : out.data) x = std::min(hi, std::max(lo, x));
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o, lo, hi]() {
    const Tensor& g = node(o).grad;
    const Tensor& va2 = node(a).value;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) {
      const Real x = va2[static_cast<size_t>(i)];
      if (x >= lo && x <= hi) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
    }
  };
  return o;
}

Var Tape::stop_gradient(Var a) {
  return push(value(a));  // value identity, no backprop
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rows() != vb.rows()) throw std::invalid_argument("concat_cols: row mismatch");
  const int m = va.rows(), na = va.cols(), nb = vb.cols();
  Tensor out({m, na + nb});
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < na; ++c)
      out[static_cast<size_t>(r * (na + nb) + c)] = va[static_cast<size_t>(r * na + c)];
    for (int c = 0; c < nb; ++c)
      out[static_cast<size_t>(r * (na + nb) + na + c)] = vb[static_cast<size_t>(r * nb + c)];
  }
  Var o = push(std::move(out));
  node(o).backprop = [this, a, b, o, m, na, nb]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    Tensor& gb = node(b).grad;
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < na; ++c)
        ga[static_cast<size_t>(r * na + c)] += g[static_cast<size_t>(r * (na + nb) + c)];
      for (int c = 0; c < nb; ++c)
        gb[static_cast<size_t>(r * nb + c)] += g[static_cast<size_t>(r * (na + nb) + na + c)];
    }
  };
  return o;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  const Tensor& va = value(a);
  const int m = va.rows(), n = va.cols();
  if (c0 < 0 || c1 > n || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
  const int w = c1 - c0;
  Tensor out({m, w});
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < w; ++c)
      out[static_cast<size_t>(r * w + c)] = va[static_cast<size_t>(r * n + c0 + c)];
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o, m, n, c0, w]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < w; ++c)
        ga[static_cast<size_t>(r * n + c0 + c)] += g[static_cast<size_t>(r * w + c)];
  };
  return o;
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  if (Tensor::count(shape) != value(a).size())
    throw std::invalid_argument("reshape: element count mismatch");
  Tensor out(std::move(shape), value(a).data);
  Var o = push(std::move(out));
  node(o).backprop = [this, a, o]() {
    const Tensor& g = node(o).grad;
    Tensor& ga = node(a).grad;
    for (int i = 0; i < g.size(); ++i) ga[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
  };
  return o;
}

Var Tape::conv1d(Var x, Var w, Var b, int stride) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  if (vx.shape.size() != 3 || vw.shape.size() != 3)
    throw std::invalid_argument("conv1d: x must be [B,C,T], w must be [Co,C,K]");
  const int B = vx.shape[0], C = vx.shape[1], T = vx.shape[2];
  const int Co = vw.shape[0], K = vw.shape[2];
  if (vw.shape[1] != C) throw std::invalid_argument("conv1d: channel mismatch");
  if (value(b).size() != Co) throw std::invalid_argument("conv1d: bias size mismatch");
  const int To = (T - K) / stride + 1;
  if (To <= 0) throw std::invalid_argument("conv1d: kernel longer than input");

  // im2col: [B*To, C*K]
  auto cols = std::make_shared<Tensor>(std::vector<int>{B * To, C * K});
  for (int bi = 0; bi < B; ++bi)
    for (int t = 0; t < To; ++t) {
      const int row = bi * To + t;
      for (int c = 0; c < C; ++c)
        for (int k = 0; k < K; ++k)
          (*cols)[static_cast<size_t>(row * C * K + c * K + k)] =
              vx[static_cast<size_t>((bi * C + c) * T + t * stride + k)];
    }

  Tensor out({B, Co, To});
  {
    ConstMatMap M(cols->data.data(), B * To, C * K);
    ConstMatMap W(vw.data.data(), Co, C * K);
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> O = M * W.transpose();
    const Tensor& vb = value(b);
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Co; ++co)
        for (int t = 0; t < To; ++t)
          out[static_cast<size_t>((bi * Co + co) * To + t)] =
              O(bi * To + t, co) + vb[static_cast<size_t>(co)];
  }
  Var o = push(std::move(out));
  node(o).backprop = [this, x, w, b, o, cols, B, C, T, Co, K, To, stride]() {
    const Tensor& g = node(o).grad;
    // dOut as [B*To, Co]
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> G(B * To, Co);
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Co; ++co)
        for (int t = 0; t < To; ++t)
          G(bi * To + t, co) = g[static_cast<size_t>((bi * Co + co) * To + t)];

    ConstMatMap M(cols->data.data(), B * To, C * K);
    ConstMatMap W(node(w).value.data.data(), Co, C * K);
    MatMap GW(node(w).grad.data.data(), Co, C * K);
    GW.noalias() += G.transpose() * M;

    Tensor& gb = node(b).grad;
    for (int co = 0; co < Co; ++co) gb[static_cast<size_t>(co)] += G.col(co).sum();

    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> GM = G * W;
    Tensor& gx = node(x).grad;
    for (int bi = 0; bi < B; ++bi)
      for (int t = 0; t < To; ++t)
        for (int c = 0; c < C; ++c)
          for (int k = 0; k < K; ++k)
            gx[static_cast<size_t>((bi * C + c) * T + t * stride + k)] +=
                GM(bi * To + t, c * K + k);
  };
  return o;
}

Var Tape::conv2d(Var x, Var w, Var b, int stride) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  if (vx.shape.size() != 4 || vw.shape.size() != 4)
    throw std::invalid_argument("conv2d: x must be [B,C,H,W], w must be [Co,C,K,K]");
  const int B = vx.shape[0], C = vx.shape[1], H = vx.shape[2], W = vx.shape[3];
  const int Co = vw.shape[0], K = vw.shape[2];
  if (vw.shape[1] != C || vw.shape[3] != K)
    throw std::invalid_argument("conv2d: weight shape mismatch");
  if (value(b).size() != Co) throw std::invalid_argument("conv2d: bias size mismatch");
  const int Ho = (H - K) / stride + 1, Wo = (W - K) / stride + 1;
  if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: kernel larger than input");

  const int patch = C * K * K;
  auto cols = std::make_shared<Tensor>(std::vector<int>{B * Ho * Wo, patch});
  for (int bi = 0; bi < B; ++bi)
    for (int i = 0; i < Ho; ++i)
      for (int j = 0; j < Wo; ++j) {
        const int row = (bi * Ho + i) * Wo + j;
        for (int c = 0; c < C; ++c)
          for (int ki = 0; ki < K; ++ki)
            for (int kj = 0; kj < K; ++kj)
              (*cols)[static_cast<size_t>(row * patch + (c * K + ki) * K + kj)] =
                  vx[static_cast<size_t>(((bi * C + c) * H + i * stride + ki) * W + j * stride +
                                         kj)];
      }

  Tensor out({B, Co, Ho, Wo});
  {
    ConstMatMap M(cols->data.data(), B * Ho * Wo, patch);
    ConstMatMap Wm(vw.data.data(), Co, patch);
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> O = M * Wm.transpose();
    const Tensor& vb = value(b);
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Co; ++co)
        for (int i = 0; i < Ho; ++i)
          for (int j = 0; j < Wo; ++j)
            out[static_cast<size_t>(((bi * Co + co) * Ho + i) * Wo + j)] =
                O((bi * Ho + i) * Wo + j, co) + vb[static_cast<size_t>(co)];
  }
  Var o = push(std::move(out));
  node(o).backprop = [this, x, w, b, o, cols, B, C, H, W, Co, K, Ho, Wo, stride, patch]() {
    const Tensor& g = node(o).grad;
    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> G(B * Ho * Wo, Co);
    for (int bi = 0; bi < B; ++bi)
      for (int co = 0; co < Co; ++co)
        for (int i = 0; i < Ho; ++i)
          for (int j = 0; j < Wo; ++j)
            G((bi * Ho + i) * Wo + j, co) =
                g[static_cast<size_t>(((bi * Co + co) * Ho + i) * Wo + j)];

    ConstMatMap M(cols->data.data(), B * Ho * Wo, patch);
    ConstMatMap Wm(node(w).value.data.data(), Co, patch);
    MatMap GW(node(w).grad.data.data(), Co, patch);
    GW.noalias() += G.transpose() * M;

    Tensor& gb = node(b).grad;
    for (int co = 0; co < Co; ++co) gb[static_cast<size_t>(co)] += G.col(co).sum();

    Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> GM = G * Wm;
    Tensor& gx = node(x).grad;
    for (int bi = 0; bi < B; ++bi)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          const int row = (bi * Ho + i) * Wo + j;
          for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj)
                gx[static_cast<size_t>(((bi * C + c) * H + i * stride + ki) * W + j * stride +
                                       kj)] += GM(row, (c * K + ki) * K + kj);
        }
  };
  return o;
}

void Tape::backward(Var output) {
  if (!output.valid()) throw std::invalid_argument("backward: invalid var");
  Node& out = node(output);
  if (out.value.size() != 1) throw std::invalid_argument("backward: output must be scalar");
  out.grad[0] = Real(1);
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.backprop) n.backprop();
    if (n.bound) {
      Tensor& pg = n.bound->grad;
      for (int k = 0; k < n.grad.size(); ++k)
        pg[static_cast<size_t>(k)] += n.grad[static_cast<size_t>(k)];
    }
  }
}

}  // namespace locoman
