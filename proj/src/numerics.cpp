#include "diplomat/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace diplomat::num {

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  std::size_t n = 1;
  for (auto dim : shape) n *= dim;
  if (shape.size() > 3) throw ShapeError("tensor rank > 3");
  if (n != data.size())
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  std::size_t n = 1;
  for (auto dim : s) n *= dim;
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(n, 0.0);
  return t;
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::randn(std::vector<std::size_t> s, std::mt19937_64& rng, double stddev) {
  Tensor t = zeros(std::move(s));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : t.data) x = dist(rng);
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_str());
  return shape[1];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

int Graph::check(Var v) const {
  if (v.idx < 0 || v.idx >= static_cast<int>(nodes_.size()))
    throw ShapeError("invalid graph handle");
  return v.idx;
}

void Graph::ensure_finite(const Tensor& t, const char* op) {
  for (double x : t.data)
    if (!std::isfinite(x))
      throw NumericFault(std::string("non-finite output of ") + op);
}

Var Graph::push(Tensor value, bool requires_grad, std::function<void()> back) {
  Node n;
  n.grad = Tensor::zeros(value.shape);
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::leaf(const Tensor& param) {
  ensure_finite(param, "leaf");
  return push(param, true, {});
}

Var Graph::input(const Tensor& t) {
  ensure_finite(t, "input");
  return push(t, false, {});
}

Var Graph::constant(double v) { return input(Tensor::scalar(v)); }

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  Tensor out;
  if (A.rank() == 2 && B.rank() == 2) {
    if (A.cols() != B.rows())
      throw ShapeError("matmul " + A.shape_str() + " x " + B.shape_str());
    std::size_t R = A.rows(), C = A.cols(), K = B.cols();
    out = Tensor::zeros({R, K});
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        double av = A.data[r * C + c];
        for (std::size_t k = 0; k < K; ++k)
          out.data[r * K + k] += av * B.data[c * K + k];
      }
  } else if (A.rank() == 2 && B.rank() == 1) {
    if (A.cols() != B.shape[0])
      throw ShapeError("matmul " + A.shape_str() + " x " + B.shape_str());
    std::size_t R = A.rows(), C = A.cols();
    out = Tensor::zeros({R});
    for (std::size_t r = 0; r < R; ++r) {
      double acc = 0;
      const double* row = &A.data[r * C];
      for (std::size_t c = 0; c < C; ++c) acc += row[c] * B.data[c];
      out.data[r] = acc;
    }
  } else if (A.rank() == 1 && B.rank() == 2) {
    if (A.shape[0] != B.rows())
      throw ShapeError("matmul " + A.shape_str() + " x " + B.shape_str());
    std::size_t R = B.rows(), C = B.cols();
    out = Tensor::zeros({C});
    for (std::size_t r = 0; r < R; ++r) {
      double av = A.data[r];
      for (std::size_t c = 0; c < C; ++c) out.data[c] += av * B.data[r * C + c];
    }
  } else {
    throw ShapeError("matmul rank combination " + A.shape_str() + " x " + B.shape_str());
  }
  ensure_finite(out, "matmul");
  int ia = a.idx, ib = b.idx;
  bool rg = nodes_[ia].requires_grad || nodes_[ib].requires_grad;
  Var v = push(std::move(out), rg, {});
  if (nodes_[v.idx].requires_grad) {
    int io = v.idx;
    nodes_[io].back = [this, ia, ib, io]() {
      const Tensor& A = nodes_[ia].value;
      const Tensor& B = nodes_[ib].value;
      const Tensor& G = nodes_[io].grad;
      Tensor& GA = nodes_[ia].grad;
      Tensor& GB = nodes_[ib].grad;
      if (A.rank() == 2 && B.rank() == 2) {
        std::size_t R = A.rows(), C = A.cols(), K = B.cols();
        if (nodes_[ia].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t k = 0; k < K; ++k) {
              double gv = G.data[r * K + k];
              for (std::size_t c = 0; c < C; ++c)
                GA.data[r * C + c] += gv * B.data[c * K + k];
            }
        if (nodes_[ib].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) {
              double av = A.data[r * C + c];
              for (std::size_t k = 0; k < K; ++k)
                GB.data[c * K + k] += av * G.data[r * K + k];
            }
      } else if (A.rank() == 2 && B.rank() == 1) {
        std::size_t R = A.rows(), C = A.cols();
        if (nodes_[ia].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
              GA.data[r * C + c] += G.data[r] * B.data[c];
        if (nodes_[ib].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
              GB.data[c] += G.data[r] * A.data[r * C + c];
      } else {  // 1D x 2D
        std::size_t R = B.rows(), C = B.cols();
        if (nodes_[ia].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
              GA.data[r] += G.data[c] * B.data[r * C + c];
        if (nodes_[ib].requires_grad)
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c)
              GB.data[r * C + c] += A.data[r] * G.data[c];
      }
    };
  }
  return v;
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B))
    throw ShapeError("add shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += B.data[i];
  ensure_finite(out, "add");
  int ia = a.idx, ib = b.idx;
  bool rg = nodes_[ia].requires_grad || nodes_[ib].requires_grad;
  Var v = push(std::move(out), rg, {});
  if (nodes_[v.idx].requires_grad) {
    int io = v.idx;
    nodes_[io].back = [this, ia, ib, io]() {
      const Tensor& G = nodes_[io].grad;
      if (nodes_[ia].requires_grad)
        for (std::size_t i = 0; i < G.size(); ++i) nodes_[ia].grad.data[i] += G.data[i];
      if (nodes_[ib].requires_grad)
        for (std::size_t i = 0; i < G.size(); ++i) nodes_[ib].grad.data[i] += G.data[i];
    };
  }
  return v;
}

Var Graph::sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (!A.same_shape(B))
    throw ShapeError("mul shape mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= B.data[i];
  ensure_finite(out, "mul");
  int ia = a.idx, ib = b.idx;
  bool rg = nodes_[ia].requires_grad || nodes_[ib].requires_grad;
  Var v = push(std::move(out), rg, {});
  if (nodes_[v.idx].requires_grad) {
    int io = v.idx;
    nodes_[io].back = [this, ia, ib, io]() {
      const Tensor& G = nodes_[io].grad;
      if (nodes_[ia].requires_grad)
        for (std::size_t i = 0; i < G.size(); ++i)
          nodes_[ia].grad.data[i] += G.data[i] * nodes_[ib].value.data[i];
      if (nodes_[ib].requires_grad)
        for (std::size_t i = 0; i < G.size(); ++i)
          nodes_[ib].grad.data[i] += G.data[i] * nodes_[ia].value.data[i];
    };
  }
  return v;
}

Var Graph::scale(Var a, double k) {
  Tensor out = value(a);
  for (auto& x : out.data) x *= k;
  ensure_finite(out, "scale");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, k]() {
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i) nodes_[ia].grad.data[i] += k * G.data[i];
    };
  }
  return v;
}

Var Graph::add_scalar(Var a, double k) {
  Tensor out = value(a);
  for (auto& x : out.data) x += k;
  ensure_finite(out, "add_scalar");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i) nodes_[ia].grad.data[i] += G.data[i];
    };
  }
  return v;
}

Var Graph::tanh_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::tanh(x);
  ensure_finite(out, "tanh");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& Y = nodes_[io].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        nodes_[ia].grad.data[i] += G.data[i] * (1.0 - Y.data[i] * Y.data[i]);
    };
  }
  return v;
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = x > 0 ? x : 0.0;
  ensure_finite(out, "relu");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& X = nodes_[ia].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        if (X.data[i] > 0) nodes_[ia].grad.data[i] += G.data[i];
    };
  }
  return v;
}

Var Graph::sigmoid(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  ensure_finite(out, "sigmoid");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& Y = nodes_[io].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        nodes_[ia].grad.data[i] += G.data[i] * Y.data[i] * (1.0 - Y.data[i]);
    };
  }
  return v;
}

Var Graph::exp_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::exp(x);
  ensure_finite(out, "exp");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& Y = nodes_[io].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        nodes_[ia].grad.data[i] += G.data[i] * Y.data[i];
    };
  }
  return v;
}

Var Graph::log_op(Var a) {
  Tensor out = value(a);
  for (auto& x : out.data) x = std::log(x);
  ensure_finite(out, "log");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      const Tensor& X = nodes_[ia].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        nodes_[ia].grad.data[i] += G.data[i] / X.data[i];
    };
  }
  return v;
}

Var Graph::softmax(Var a, int axis) {
  const Tensor& A = value(a);
  std::size_t rows, cols;
  if (A.rank() == 1) {
    if (axis != 0) throw ShapeError("softmax axis must be 0 for rank-1");
    rows = 1;
    cols = A.shape[0];
  } else if (A.rank() == 2) {
    if (axis != 1) throw ShapeError("softmax axis must be 1 for rank-2");
    rows = A.rows();
    cols = A.cols();
  } else {
    throw ShapeError("softmax rank " + A.shape_str());
  }
  Tensor out = A;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = &out.data[r * cols];
    double mx = row[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double z = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      z += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= z;
  }
  ensure_finite(out, "softmax");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, rows, cols]() {
      const Tensor& Y = nodes_[io].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = &Y.data[r * cols];
        const double* g = &G.data[r * cols];
        double dot = 0;
        for (std::size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
        for (std::size_t c = 0; c < cols; ++c)
          nodes_[ia].grad.data[r * cols + c] += y[c] * (g[c] - dot);
      }
    };
  }
  return v;
}

Var Graph::log_softmax(Var a) {
  const Tensor& A = value(a);
  if (A.rank() != 1) throw ShapeError("log_softmax expects rank-1, got " + A.shape_str());
  std::size_t n = A.size();
  if (n == 0) throw ShapeError("log_softmax of empty tensor");
  Tensor out = A;
  double mx = out.data[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, out.data[i]);
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(out.data[i] - mx);
  double lz = std::log(z);
  for (std::size_t i = 0; i < n; ++i) out.data[i] = out.data[i] - mx - lz;
  ensure_finite(out, "log_softmax");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, n]() {
      const Tensor& Y = nodes_[io].value;
      const Tensor& G = nodes_[io].grad;
      double gsum = 0;
      for (std::size_t i = 0; i < n; ++i) gsum += G.data[i];
      for (std::size_t i = 0; i < n; ++i)
        nodes_[ia].grad.data[i] += G.data[i] - std::exp(Y.data[i]) * gsum;
    };
  }
  return v;
}

Var Graph::broadcast(Var a, std::size_t n) {
  const Tensor& A = value(a);
  if (A.rank() != 0) throw ShapeError("broadcast expects scalar, got " + A.shape_str());
  Tensor out = Tensor::zeros({n});
  std::fill(out.data.begin(), out.data.end(), A.data[0]);
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      double acc = 0;
      for (double g : nodes_[io].grad.data) acc += g;
      nodes_[ia].grad.data[0] += acc;
    };
  }
  return v;
}

Var Graph::sum(Var a) {
  const Tensor& A = value(a);
  double acc = 0;
  for (double x : A.data) acc += x;
  Tensor out = Tensor::scalar(acc);
  ensure_finite(out, "sum");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io]() {
      double g = nodes_[io].grad.data[0];
      for (auto& x : nodes_[ia].grad.data) x += g;
    };
  }
  return v;
}

Var Graph::mean(Var a) {
  std::size_t n = value(a).size();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var Graph::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  std::size_t total = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& T = value(p);
    if (T.rank() > 1) throw ShapeError("concat expects rank-0/1 parts, got " + T.shape_str());
    total += T.size();
    rg = rg || nodes_[p.idx].requires_grad;
  }
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor& T = value(p);
    std::copy(T.data.begin(), T.data.end(), out.data.begin() + off);
    off += T.size();
  }
  Var v = push(std::move(out), rg, {});
  if (nodes_[v.idx].requires_grad) {
    std::vector<int> idxs;
    idxs.reserve(parts.size());
    for (Var p : parts) idxs.push_back(p.idx);
    int io = v.idx;
    nodes_[io].back = [this, idxs, io]() {
      const Tensor& G = nodes_[io].grad;
      std::size_t off = 0;
      for (int ip : idxs) {
        std::size_t n = nodes_[ip].value.size();
        if (nodes_[ip].requires_grad)
          for (std::size_t i = 0; i < n; ++i) nodes_[ip].grad.data[i] += G.data[off + i];
        off += n;
      }
    };
  }
  return v;
}

Var Graph::slice(Var a, std::size_t start, std::size_t len) {
  const Tensor& A = value(a);
  if (A.rank() != 1) throw ShapeError("slice expects rank-1, got " + A.shape_str());
  if (start + len > A.size()) throw ShapeError("slice out of range");
  Tensor out = Tensor::zeros({len});
  std::copy(A.data.begin() + start, A.data.begin() + start + len, out.data.begin());
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, start, len]() {
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < len; ++i) nodes_[ia].grad.data[start + i] += G.data[i];
    };
  }
  return v;
}

Var Graph::mask_fill(Var a, const std::vector<std::uint8_t>& mask, double fill) {
  const Tensor& A = value(a);
  if (mask.size() != A.size())
    throw ShapeError("mask length " + std::to_string(mask.size()) + " vs tensor " +
                     A.shape_str());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out.data[i] = fill;
  ensure_finite(out, "mask_fill");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    std::vector<std::uint8_t> m = mask;
    nodes_[io].back = [this, ia, io, m = std::move(m)]() {
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        if (!m[i]) nodes_[ia].grad.data[i] += G.data[i];
    };
  }
  return v;
}

Var Graph::clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ShapeError("clamp: lo > hi");
  Tensor out = value(a);
  for (auto& x : out.data) x = std::min(hi, std::max(lo, x));
  ensure_finite(out, "clamp");
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, lo, hi]() {
      const Tensor& X = nodes_[ia].value;
      const Tensor& G = nodes_[io].grad;
      for (std::size_t i = 0; i < G.size(); ++i)
        if (X.data[i] > lo && X.data[i] < hi) nodes_[ia].grad.data[i] += G.data[i];
    };
  }
  return v;
}

Var Graph::pick(Var a, std::size_t index) {
  const Tensor& A = value(a);
  if (A.rank() != 1) throw ShapeError("pick expects rank-1, got " + A.shape_str());
  if (index >= A.size()) throw ShapeError("pick index out of range");
  Tensor out = Tensor::scalar(A.data[index]);
  Var v = push(std::move(out), nodes_[a.idx].requires_grad, {});
  if (nodes_[v.idx].requires_grad) {
    int ia = a.idx, io = v.idx;
    nodes_[io].back = [this, ia, io, index]() {
      nodes_[ia].grad.data[index] += nodes_[io].grad.data[0];
    };
  }
  return v;
}

void Graph::backward(Var root) {
  if (!grad_enabled_) throw ShapeError("backward on a no-grad graph");
  int ir = check(root);
  if (nodes_[ir].value.rank() != 0)
    throw ShapeError("backward root must be scalar, got " + nodes_[ir].value.shape_str());
  nodes_[ir].grad.data[0] = 1.0;
  for (int i = ir; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

void Graph::zero_grads() {
  for (auto& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
}

LstmParams LstmParams::init(std::size_t dx, std::size_t dh, std::mt19937_64& rng) {
  LstmParams p;
  p.w_x = Tensor::randn({4 * dh, dx}, rng, 1.0 / std::sqrt(static_cast<double>(dx)));
  p.w_h = Tensor::randn({4 * dh, dh}, rng, 1.0 / std::sqrt(static_cast<double>(dh)));
  p.b = Tensor::zeros({4 * dh});
  return p;
}

std::pair<Var, Var> lstm_cell(Graph& g, Var x, Var h, Var c, const LstmVars& p) {
  std::size_t dh = g.value(h).size();
  Var gates = g.add(g.add(g.matmul(p.w_x, x), g.matmul(p.w_h, h)), p.b);
  Var gi = g.sigmoid(g.slice(gates, 0, dh));
  Var gf = g.sigmoid(g.slice(gates, dh, dh));
  Var go = g.sigmoid(g.slice(gates, 2 * dh, dh));
  Var gg = g.tanh_op(g.slice(gates, 3 * dh, dh));
  Var c_next = g.add(g.mul(gf, c), g.mul(gi, gg));
  Var h_next = g.mul(go, g.tanh_op(c_next));
  return {h_next, c_next};
}

void AdamState::step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw ShapeError("adam: param/grad list length mismatch");
  if (m_.empty()) {
    for (auto* p : params) {
      m_.push_back(Tensor::zeros(p->shape));
      v_.push_back(Tensor::zeros(p->shape));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("adam: param list changed size");
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& gr = grads[i];
    if (!p.same_shape(gr))
      throw ShapeError("adam: shape mismatch " + p.shape_str() + " vs " + gr.shape_str());
    for (std::size_t j = 0; j < p.size(); ++j) {
      double g = gr.data[j];
      m_[i].data[j] = cfg_.beta1 * m_[i].data[j] + (1 - cfg_.beta1) * g;
      v_[i].data[j] = cfg_.beta2 * v_[i].data[j] + (1 - cfg_.beta2) * g * g;
      double mhat = m_[i].data[j] / bc1;
      double vhat = v_[i].data[j] / bc2;
      p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double global_norm(const std::vector<Tensor>& grads) {
  double acc = 0;
  for (const auto& g : grads)
    for (double x : g.data) acc += x * x;
  return std::sqrt(acc);
}

namespace {

constexpr char kCheckpointMagic[4] = {'D', 'D', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_raw(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_raw(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw ShapeError("truncated checkpoint");
  return v;
}

}  // namespace

void save_checkpoint(const std::vector<Tensor>& tensors, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ShapeError("cannot open checkpoint for writing: " + path);
  os.write(kCheckpointMagic, 4);
  write_raw<std::uint32_t>(os, kCheckpointVersion);
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(d));
  }
  for (const auto& t : tensors)
    for (double x : t.data) write_raw<double>(os, x);
  if (!os) throw ShapeError("checkpoint write failed: " + path);
}

std::vector<Tensor> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ShapeError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw ShapeError("bad checkpoint magic: " + path);
  auto version = read_raw<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw ShapeError("unsupported checkpoint version " + std::to_string(version));
  auto count = read_raw<std::uint32_t>(is);
  std::vector<Tensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto rank = read_raw<std::uint32_t>(is);
    if (rank > 3) throw ShapeError("checkpoint tensor rank > 3");
    std::vector<std::size_t> shape;
    for (std::uint32_t r = 0; r < rank; ++r)
      shape.push_back(static_cast<std::size_t>(read_raw<std::uint64_t>(is)));
    tensors.push_back(Tensor::zeros(std::move(shape)));
  }
  for (auto& t : tensors)
    for (auto& x : t.data) x = read_raw<double>(is);
  return tensors;
}

}  // namespace diplomat::num
