#pragma once
// Dense tensors (rank <= 3), a define-by-run reverse-mode tape, and Adam.
// 64-bit reals throughout; every public op checks its output for NaN/Inf.

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace diplomat::num {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericFault : std::runtime_error {
  explicit NumericFault(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
  std::vector<std::size_t> shape;  // rank 0..3; rank 0 = scalar
  std::vector<double> data;        // row-major

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  // Gaussian init scaled by 1/sqrt(fan_in) for matrices, zeros for biases elsewhere.
  static Tensor randn(std::vector<std::size_t> s, std::mt19937_64& rng, double stddev);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
};

// Handle into a Graph's node list.
struct Var {
  int idx = -1;
};

// Append-only tape. Insertion order is topological order; backward() runs the
// recorded closures in reverse. When grads are disabled the same forward
// arithmetic runs without recording closures, so rollout and update paths
// produce identical values.
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  // Parameter leaf: after backward(), grad(v) holds dL/dparam.
  Var leaf(const Tensor& param);
  // Non-differentiable input.
  Var input(const Tensor& t);
  Var constant(double v);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const { return nodes_[check(v)].grad; }

  Var matmul(Var a, Var b);  // (R,C)x(C,K); (R,C)x(C)->(R); (R)x(R,C)->(C)
  Var add(Var a, Var b);     // same shape
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);     // elementwise, same shape
  Var scale(Var a, double k);
  Var add_scalar(Var a, double k);
  Var tanh_op(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var exp_op(Var a);
  Var log_op(Var a);
  Var softmax(Var a, int axis);  // rank 1: axis 0; rank 2: axis 1 (per row)
  Var log_softmax(Var a);        // rank 1, max-subtracted; safe under -1e9 masks
  Var broadcast(Var a, std::size_t n);  // scalar -> rank-1 of length n
  Var sum(Var a);                // -> scalar
  Var mean(Var a);               // -> scalar
  Var concat(const std::vector<Var>& parts);        // rank-0/1 parts -> rank-1
  Var slice(Var a, std::size_t start, std::size_t len);  // rank-1 slice
  Var mask_fill(Var a, const std::vector<std::uint8_t>& mask, double fill);
  Var clamp(Var a, double lo, double hi);  // grad passes only strictly inside
  Var pick(Var a, std::size_t index);  // rank-1 element -> scalar

  void backward(Var root);  // root must be scalar
  void zero_grads();

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;  // empty for leaves/inputs or when grads off
    bool requires_grad = false;
  };

  int check(Var v) const;
  Var push(Tensor value, bool requires_grad, std::function<void()> back);
  static void ensure_finite(const Tensor& t, const char* op);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// LSTM parameters for one cell: input dim dx, hidden dim dh.
// Gate order in the stacked matrices: input, forget, output, candidate.
struct LstmParams {
  Tensor w_x;  // (4*dh, dx)
  Tensor w_h;  // (4*dh, dh)
  Tensor b;    // (4*dh)
  static LstmParams init(std::size_t dx, std::size_t dh, std::mt19937_64& rng);
};

struct LstmVars {
  Var w_x, w_h, b;
};

// Standard gate equations: c' = f*c + i*g, h' = o*tanh(c').
std::pair<Var, Var> lstm_cell(Graph& g, Var x, Var h, Var c, const LstmVars& p);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam state per parameter list; moment tensors are lazily shaped on the
// first step.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

  // Applies one bias-corrected update in place. params and grads must be
  // parallel lists with matching shapes.
  void step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Global L2 norm across a gradient list; used for gradient clipping.
double global_norm(const std::vector<Tensor>& grads);

// Checkpoint file: magic "DDCK", u32 version, u32 tensor count, per-tensor
// shape table (u32 rank, u64 dims), then the data as little-endian f64 in
// declaration order.
void save_checkpoint(const std::vector<Tensor>& tensors, const std::string& path);
std::vector<Tensor> load_checkpoint(const std::string& path);

}  // namespace diplomat::num
