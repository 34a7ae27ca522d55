#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace locoman {

#ifdef LOCOMAN_REAL32
using Real = float;
#else
using Real = double;
#endif

/// Dense row-major tensor. Most ops treat it as logical 2-D (rows = batch);
/// conv ops use 3-D/4-D shapes.
struct Tensor {
  std::vector<int> shape;
  std::vector<Real> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), Real(0));
  }
  Tensor(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != static_cast<size_t>(count(shape)))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static long count(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) n *= d;
    return n;
  }
  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor scalar(Real v) { return Tensor({1}, {v}); }

  int size() const { return static_cast<int>(data.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  Real& operator[](size_t i) { return data[i]; }
  Real operator[](size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

/// Named trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape);
  }
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), Real(0)); }
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape. Nodes are created in topological order;
/// backward() sweeps them in reverse. The tape is rebuilt every step.
class Tape {
 public:
  Var input(Tensor value);            // constant leaf
  Var param(Parameter& p);            // leaf whose grad flows into p.grad

  Var add(Var a, Var b);              // same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);              // elementwise
  Var add_rowvec(Var a, Var v);       // [m,n] + [n] broadcast over rows
  Var mul_rowvec(Var a, Var v);
  Var scale(Var a, Real s);
  Var add_const(Var a, Real c);
  Var matmul(Var a, Var b);           // [m,k] x [k,n]
  Var elu(Var a);
  Var tanh_op(Var a);
  Var exp_op(Var a);
  Var log_op(Var a);
  Var square(Var a);
  Var neg(Var a) { return scale(a, Real(-1)); }
  Var sum(Var a);                     // -> scalar
  Var mean(Var a);                    // -> scalar
  Var sum_cols(Var a);                // [m,n] -> [m,1]
  Var norm2(Var a);                   // -> scalar L2 norm
  Var min_op(Var a, Var b);           // elementwise; ties route grad to a
  Var clamp(Var a, Real lo, Real hi); // pass-through grad strictly inside
  Var stop_gradient(Var a);
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, int c0, int c1);
  Var reshape(Var a, std::vector<int> shape);
  /// x [B, C_in, T] -> [B, C_out, T_out]; w [C_out, C_in, K]
  Var conv1d(Var x, Var w, Var b, int stride);
  /// x [B, C_in, H, W] -> [B, C_out, H_out, W_out]; w [C_out, C_in, K, K]
  Var conv2d(Var x, Var w, Var b, int stride);

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  Tensor& grad(Var v) { return nodes_[static_cast<size_t>(v.id)].grad; }

  /// Reverse sweep from a scalar output (seeded with 1) and accumulate into
  /// bound Parameter::grad.
  void backward(Var output);

  void clear();
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> backprop;  // empty for leaves
    Parameter* bound = nullptr;
  };

  Var push(Tensor value, std::function<void()> backprop = nullptr, Parameter* bound = nullptr);
  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }

  std::vector<Node> nodes_;
};

}  // namespace locoman
