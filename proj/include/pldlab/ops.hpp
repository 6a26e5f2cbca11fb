#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "pldlab/kernels.hpp"
#include "pldlab/tensor.hpp"

namespace pldlab::ops {

// Every operator follows the same pattern: validate shapes, compute the
// forward value eagerly, and if a Graph is active and any input requires
// grad, record a closure that accumulates into the inputs' grad buffers.
// Closures capture TensorNode shared_ptrs, never Tensor handles, to make
// ownership explicit.

template <class T>
bool recording(std::initializer_list<const Tensor<T>*> ins) {
  if (!Graph<T>::active()) return false;
  for (const auto* t : ins)
    if (t->requires_grad()) return true;
  return false;
}

template <class T>
void mark_recorded(Tensor<T>& out) {
  out.node()->requires_grad = true;
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <class T>
void check_rank(const Tensor<T>& t, int rank, const char* who) {
  if (t.rank() != rank)
    throw ShapeError(std::string(who) + ": expected rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
}

// ---------------------------------------------------------------------- gemm

// C = A[m,k] * B[k,n]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  check_rank(a, 2, "matmul lhs");
  check_rank(b, 2, "matmul rhs");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dims disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros({m, n});
  kernels::gemm_nn(a.data(), b.data(), out.data(), m, k, n, false);
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, m, k, n, ga, gb] {
      if (ga) {
        an->ensure_grad();  // dA += dC * B^T
        kernels::gemm_nt(on->grad.data(), bn->value.data(), an->grad.data(), m,
                         n, k, true);
      }
      if (gb) {
        bn->ensure_grad();  // dB += A^T * dC
        kernels::gemm_tn(an->value.data(), on->grad.data(), bn->grad.data(), m,
                         k, n, true);
      }
    });
  }
  return out;
}

// C = A[m,k] * B[n,k]^T  (rhs stored row-major as [n,k])
template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  check_rank(a, 2, "matmul_nt lhs");
  check_rank(b, 2, "matmul_nt rhs");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k)
    throw ShapeError("matmul_nt: inner dims disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  Tensor<T> out = Tensor<T>::zeros({m, n});
  kernels::gemm_nt(a.data(), b.data(), out.data(), m, k, n, false);
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, m, k, n, ga, gb] {
      if (ga) {
        an->ensure_grad();  // dA += dC * B
        kernels::gemm_nn(on->grad.data(), bn->value.data(), an->grad.data(), m,
                         n, k, true);
      }
      if (gb) {
        bn->ensure_grad();  // dB += dC^T * A
        kernels::gemm_tn(on->grad.data(), an->value.data(), bn->grad.data(), m,
                         n, k, true);
      }
    });
  }
  return out;
}

// --------------------------------------------------------------- elementwise

template <class T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* who) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(who) + ": shape mismatch, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  const T* pa = a.data();
  const T* pb = b.data();
  T* po = out.data();
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, n, ga, gb] {
      if (ga) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      }
      if (gb) {
        bn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, n, ga, gb] {
      if (ga) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
      }
      if (gb) {
        bn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "hadamard");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, n, ga, gb] {
      if (ga) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i)
          an->grad[i] += on->grad[i] * bn->value[i];
      }
      if (gb) {
        bn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i)
          bn->grad[i] += on->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

// y = s * x, plain scalar
template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = s * a.data()[i];
  if (recording<T>({&a})) {
    mark_recorded(out);
    auto an = a.node(), on = out.node();
    Graph<T>::active()->record([an, on, n, s] {
      an->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += s * on->grad[i];
    });
  }
  return out;
}

// y = x + c, plain scalar
template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + c;
  if (recording<T>({&a})) {
    mark_recorded(out);
    auto an = a.node(), on = out.node();
    Graph<T>::active()->record([an, on, n] {
      an->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    });
  }
  return out;
}

// y = x * s where s is a scalar tensor (grads flow into both)
template <class T>
Tensor<T> scale_by(const Tensor<T>& a, const Tensor<T>& s) {
  if (s.size() != 1)
    throw ShapeError("scale_by: scale must be scalar, got " +
                     shape_str(s.shape()));
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::int64_t n = a.size();
  const T sv = s.data()[0];
  for (std::int64_t i = 0; i < n; ++i) out.data()[i] = sv * a.data()[i];
  if (recording<T>({&a, &s})) {
    mark_recorded(out);
    auto an = a.node(), sn = s.node(), on = out.node();
    bool ga = a.requires_grad(), gs = s.requires_grad();
    Graph<T>::active()->record([an, sn, on, n, ga, gs] {
      const T svb = sn->value[0];
      if (ga) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += svb * on->grad[i];
      }
      if (gs) {
        sn->ensure_grad();
        T acc = 0;
        for (std::int64_t i = 0; i < n; ++i) acc += on->grad[i] * an->value[i];
        sn->grad[0] += acc;
      }
    });
  }
  return out;
}

// x[r,c] + v[c] broadcast over rows
template <class T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v) {
  check_rank(x, 2, "add_rowvec x");
  if (v.rank() != 1 || v.dim(0) != x.dim(1))
    throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " vs " +
                     shape_str(v.shape()));
  const int r = x.dim(0), c = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.data()[std::int64_t(i) * c + j] =
          x.data()[std::int64_t(i) * c + j] + v.data()[j];
  if (recording<T>({&x, &v})) {
    mark_recorded(out);
    auto xn = x.node(), vn = v.node(), on = out.node();
    bool gx = x.requires_grad(), gv = v.requires_grad();
    Graph<T>::active()->record([xn, vn, on, r, c, gx, gv] {
      if (gx) {
        xn->ensure_grad();
        const std::int64_t n = std::int64_t(r) * c;
        for (std::int64_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i];
      }
      if (gv) {
        vn->ensure_grad();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            vn->grad[j] += on->grad[std::int64_t(i) * c + j];
      }
    });
  }
  return out;
}

// x[b*n, c] + t[n, c] tiled b times (e.g. positional embeddings over a batch)
template <class T>
Tensor<T> add_tile_rows(const Tensor<T>& x, const Tensor<T>& t) {
  check_rank(x, 2, "add_tile_rows x");
  check_rank(t, 2, "add_tile_rows t");
  const int rows = x.dim(0), c = x.dim(1), n = t.dim(0);
  if (t.dim(1) != c || n == 0 || rows % n != 0)
    throw ShapeError("add_tile_rows: " + shape_str(x.shape()) + " vs " +
                     shape_str(t.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (int i = 0; i < rows; ++i) {
    const T* trow = t.data() + std::int64_t(i % n) * c;
    const T* xrow = x.data() + std::int64_t(i) * c;
    T* orow = out.data() + std::int64_t(i) * c;
    for (int j = 0; j < c; ++j) orow[j] = xrow[j] + trow[j];
  }
  if (recording<T>({&x, &t})) {
    mark_recorded(out);
    auto xn = x.node(), tn = t.node(), on = out.node();
    bool gx = x.requires_grad(), gt = t.requires_grad();
    Graph<T>::active()->record([xn, tn, on, rows, c, n, gx, gt] {
      if (gx) {
        xn->ensure_grad();
        const std::int64_t total = std::int64_t(rows) * c;
        for (std::int64_t i = 0; i < total; ++i) xn->grad[i] += on->grad[i];
      }
      if (gt) {
        tn->ensure_grad();
        for (int i = 0; i < rows; ++i) {
          T* trow = tn->grad.data() + std::int64_t(i % n) * c;
          const T* orow = on->grad.data() + std::int64_t(i) * c;
          for (int j = 0; j < c; ++j) trow[j] += orow[j];
        }
      }
    });
  }
  return out;
}

// ------------------------------------------------------------ slicing / glue

template <class T>
Tensor<T> slice_rows(const Tensor<T>& x, int r0, int cnt) {
  check_rank(x, 2, "slice_rows");
  const int r = x.dim(0), c = x.dim(1);
  if (r0 < 0 || cnt < 0 || r0 + cnt > r)
    throw ShapeError("slice_rows: [" + std::to_string(r0) + "," +
                     std::to_string(r0 + cnt) + ") out of " +
                     shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros({cnt, c});
  std::copy(x.data() + std::int64_t(r0) * c,
            x.data() + std::int64_t(r0 + cnt) * c, out.data());
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, r0, cnt, c] {
      xn->ensure_grad();
      for (std::int64_t i = 0; i < std::int64_t(cnt) * c; ++i)
        xn->grad[std::int64_t(r0) * c + i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> slice_cols(const Tensor<T>& x, int c0, int cnt) {
  check_rank(x, 2, "slice_cols");
  const int r = x.dim(0), c = x.dim(1);
  if (c0 < 0 || cnt < 0 || c0 + cnt > c)
    throw ShapeError("slice_cols: [" + std::to_string(c0) + "," +
                     std::to_string(c0 + cnt) + ") out of " +
                     shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros({r, cnt});
  for (int i = 0; i < r; ++i)
    std::copy(x.data() + std::int64_t(i) * c + c0,
              x.data() + std::int64_t(i) * c + c0 + cnt,
              out.data() + std::int64_t(i) * cnt);
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, r, c, c0, cnt] {
      xn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cnt; ++j)
          xn->grad[std::int64_t(i) * c + c0 + j] +=
              on->grad[std::int64_t(i) * cnt + j];
    });
  }
  return out;
}

// 1-D slice, used for per-head views of norm gains
template <class T>
Tensor<T> slice_vec(const Tensor<T>& x, int c0, int cnt) {
  check_rank(x, 1, "slice_vec");
  if (c0 < 0 || cnt < 0 || c0 + cnt > x.dim(0))
    throw ShapeError("slice_vec: [" + std::to_string(c0) + "," +
                     std::to_string(c0 + cnt) + ") out of " +
                     shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros({cnt});
  std::copy(x.data() + c0, x.data() + c0 + cnt, out.data());
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, c0, cnt] {
      xn->ensure_grad();
      for (int i = 0; i < cnt; ++i) xn->grad[c0 + i] += on->grad[i];
    });
  }
  return out;
}

template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  const int c = parts[0].dim(1);
  int rows = 0;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_rows part");
    if (p.dim(1) != c)
      throw ShapeError("concat_rows: column mismatch, " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    rows += p.dim(0);
  }
  Tensor<T> out = Tensor<T>::zeros({rows, c});
  std::int64_t off = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + off);
    off += p.size();
    any_grad = any_grad || p.requires_grad();
  }
  if (Graph<T>::active() && any_grad) {
    mark_recorded(out);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    nodes.reserve(parts.size());
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    Graph<T>::active()->record([nodes, on] {
      std::int64_t off2 = 0;
      for (auto& pn : nodes) {
        const std::int64_t sz = pn->size();
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::int64_t i = 0; i < sz; ++i)
            pn->grad[i] += on->grad[off2 + i];
        }
        off2 += sz;
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty input");
  const int r = parts[0].dim(0);
  int cols = 0;
  for (const auto& p : parts) {
    check_rank(p, 2, "concat_cols part");
    if (p.dim(0) != r)
      throw ShapeError("concat_cols: row mismatch, " +
                       shape_str(parts[0].shape()) + " vs " +
                       shape_str(p.shape()));
    cols += p.dim(1);
  }
  Tensor<T> out = Tensor<T>::zeros({r, cols});
  int coff = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    const int pc = p.dim(1);
    for (int i = 0; i < r; ++i)
      std::copy(p.data() + std::int64_t(i) * pc,
                p.data() + std::int64_t(i) * pc + pc,
                out.data() + std::int64_t(i) * cols + coff);
    coff += pc;
    any_grad = any_grad || p.requires_grad();
  }
  if (Graph<T>::active() && any_grad) {
    mark_recorded(out);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    Graph<T>::active()->record([nodes, on, r, cols] {
      int coff2 = 0;
      for (auto& pn : nodes) {
        const int pc = pn->shape[1];
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < pc; ++j)
              pn->grad[std::int64_t(i) * pc + j] +=
                  on->grad[std::int64_t(i) * cols + coff2 + j];
        }
        coff2 += pc;
      }
    });
  }
  return out;
}

// y[i,:] = table[idx[i],:]; backward scatter-adds rows (sequential, so
// repeated indices are deterministic).
template <class T>
Tensor<T> gather_rows(const Tensor<T>& table, const std::vector<int>& idx) {
  check_rank(table, 2, "gather_rows");
  const int rows = table.dim(0), c = table.dim(1);
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(idx.size()), c});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= rows)
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) +
                       " out of " + shape_str(table.shape()));
    std::copy(table.data() + std::int64_t(idx[i]) * c,
              table.data() + std::int64_t(idx[i]) * c + c,
              out.data() + std::int64_t(i) * c);
  }
  if (recording<T>({&table})) {
    mark_recorded(out);
    auto tn = table.node(), on = out.node();
    Graph<T>::active()->record([tn, on, idx, c] {
      tn->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < c; ++j)
          tn->grad[std::int64_t(idx[i]) * c + j] +=
              on->grad[std::int64_t(i) * c + j];
    });
  }
  return out;
}

// -------------------------------------------------------------- activations

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::int64_t n = x.size();
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x.data()[i]);
    out.data()[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, n] {
      xn->ensure_grad();
      constexpr double kInvSqrt2Pi = 0.3989422804014326779;
      for (std::int64_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(xn->value[i]);
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        xn->grad[i] += on->grad[i] * static_cast<T>(cdf + v * pdf);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> silu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = x.data()[i];
    out.data()[i] = v / (T(1) + std::exp(-v));
  }
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, n] {
      xn->ensure_grad();
      for (std::int64_t i = 0; i < n; ++i) {
        const T v = xn->value[i];
        const T sig = T(1) / (T(1) + std::exp(-v));
        xn->grad[i] += on->grad[i] * sig * (T(1) + v * (T(1) - sig));
      }
    });
  }
  return out;
}

// exp of a scalar tensor
template <class T>
Tensor<T> exp_scalar(const Tensor<T>& x) {
  if (x.size() != 1)
    throw ShapeError("exp_scalar: want scalar, got " + shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::scalar(std::exp(x.data()[0]));
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on] {
      xn->ensure_grad();
      xn->grad[0] += on->grad[0] * on->value[0];
    });
  }
  return out;
}

// dot product of two 1-D tensors -> scalar
template <class T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  check_rank(a, 1, "dot lhs");
  check_rank(b, 1, "dot rhs");
  check_same_shape(a, b, "dot");
  T acc = 0;
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) acc += a.data()[i] * b.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (recording<T>({&a, &b})) {
    mark_recorded(out);
    auto an = a.node(), bn = b.node(), on = out.node();
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Graph<T>::active()->record([an, bn, on, n, ga, gb] {
      const T g = on->grad[0];
      if (ga) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) an->grad[i] += g * bn->value[i];
      }
      if (gb) {
        bn->ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) bn->grad[i] += g * an->value[i];
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------- norms

template <class T>
Tensor<T> layer_norm_rows(const Tensor<T>& x, const Tensor<T>& gain,
                          const Tensor<T>& bias, T eps = T(1e-5)) {
  check_rank(x, 2, "layer_norm_rows x");
  const int r = x.dim(0), c = x.dim(1);
  if (gain.rank() != 1 || gain.dim(0) != c || bias.rank() != 1 ||
      bias.dim(0) != c)
    throw ShapeError("layer_norm_rows: params " + shape_str(gain.shape()) +
                     "/" + shape_str(bias.shape()) + " vs x " +
                     shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  std::vector<T> xhat(std::size_t(r) * c);
  std::vector<T> inv_std(r);
  for (int i = 0; i < r; ++i) {
    const T* xr = x.data() + std::int64_t(i) * c;
    T mean = 0;
    for (int j = 0; j < c; ++j) mean += xr[j];
    mean /= T(c);
    T var = 0;
    for (int j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= T(c);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[i] = inv;
    T* outr = out.data() + std::int64_t(i) * c;
    for (int j = 0; j < c; ++j) {
      const T xh = (xr[j] - mean) * inv;
      xhat[std::size_t(i) * c + j] = xh;
      outr[j] = gain.data()[j] * xh + bias.data()[j];
    }
  }
  if (recording<T>({&x, &gain, &bias})) {
    mark_recorded(out);
    auto xn = x.node(), gn = gain.node(), bn = bias.node(), on = out.node();
    bool gx = x.requires_grad(), gg = gain.requires_grad(),
         gb = bias.requires_grad();
    Graph<T>::active()->record(
        [xn, gn, bn, on, r, c, xhat = std::move(xhat),
         inv_std = std::move(inv_std), gx, gg, gb] {
          if (gx) xn->ensure_grad();
          if (gg) gn->ensure_grad();
          if (gb) bn->ensure_grad();
          for (int i = 0; i < r; ++i) {
            const T* dy = on->grad.data() + std::int64_t(i) * c;
            const T* xh = xhat.data() + std::size_t(i) * c;
            if (gg)
              for (int j = 0; j < c; ++j) gn->grad[j] += dy[j] * xh[j];
            if (gb)
              for (int j = 0; j < c; ++j) bn->grad[j] += dy[j];
            if (gx) {
              // dx = inv/c * (c*dxh - sum(dxh) - xhat * sum(dxh*xhat))
              T sum_dxh = 0, sum_dxh_xh = 0;
              for (int j = 0; j < c; ++j) {
                const T dxh = dy[j] * gn->value[j];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * xh[j];
              }
              T* dx = xn->grad.data() + std::int64_t(i) * c;
              const T inv = inv_std[i];
              for (int j = 0; j < c; ++j) {
                const T dxh = dy[j] * gn->value[j];
                dx[j] += inv * (dxh - (sum_dxh + xh[j] * sum_dxh_xh) / T(c));
              }
            }
          }
        });
  }
  return out;
}

template <class T>
Tensor<T> rms_norm_rows(const Tensor<T>& x, const Tensor<T>& gain,
                        T eps = T(1e-5)) {
  check_rank(x, 2, "rms_norm_rows x");
  const int r = x.dim(0), c = x.dim(1);
  if (gain.rank() != 1 || gain.dim(0) != c)
    throw ShapeError("rms_norm_rows: gain " + shape_str(gain.shape()) +
                     " vs x " + shape_str(x.shape()));
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  std::vector<T> inv_rms(r);
  for (int i = 0; i < r; ++i) {
    const T* xr = x.data() + std::int64_t(i) * c;
    T ms = 0;
    for (int j = 0; j < c; ++j) ms += xr[j] * xr[j];
    ms /= T(c);
    const T inv = T(1) / std::sqrt(ms + eps);
    inv_rms[i] = inv;
    T* outr = out.data() + std::int64_t(i) * c;
    for (int j = 0; j < c; ++j) outr[j] = gain.data()[j] * xr[j] * inv;
  }
  if (recording<T>({&x, &gain})) {
    mark_recorded(out);
    auto xn = x.node(), gn = gain.node(), on = out.node();
    bool gx = x.requires_grad(), gg = gain.requires_grad();
    Graph<T>::active()->record([xn, gn, on, r, c, inv_rms = std::move(inv_rms),
                                gx, gg] {
      if (gx) xn->ensure_grad();
      if (gg) gn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T* dy = on->grad.data() + std::int64_t(i) * c;
        const T* xr = xn->value.data() + std::int64_t(i) * c;
        const T inv = inv_rms[i];
        if (gg)
          for (int j = 0; j < c; ++j) gn->grad[j] += dy[j] * xr[j] * inv;
        if (gx) {
          T sum = 0;  // sum_k dy_k * g_k * x_k
          for (int j = 0; j < c; ++j) sum += dy[j] * gn->value[j] * xr[j];
          T* dx = xn->grad.data() + std::int64_t(i) * c;
          const T inv3_over_c = inv * inv * inv / T(c);
          for (int j = 0; j < c; ++j)
            dx[j] += dy[j] * gn->value[j] * inv - xr[j] * inv3_over_c * sum;
        }
      }
    });
  }
  return out;
}

// ------------------------------------------------------- softmax / losses

template <class T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  check_rank(x, 2, "softmax_rows");
  const int r = x.dim(0), c = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  kernels::softmax_rows(x.data(), out.data(), r, c);
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, r, c] {
      xn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T* y = on->value.data() + std::int64_t(i) * c;
        const T* dy = on->grad.data() + std::int64_t(i) * c;
        T dotv = 0;
        for (int j = 0; j < c; ++j) dotv += dy[j] * y[j];
        T* dx = xn->grad.data() + std::int64_t(i) * c;
        for (int j = 0; j < c; ++j) dx[j] += y[j] * (dy[j] - dotv);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T> log_softmax_rows(const Tensor<T>& x) {
  check_rank(x, 2, "log_softmax_rows");
  const int r = x.dim(0), c = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  for (int i = 0; i < r; ++i) {
    const T* xr = x.data() + std::int64_t(i) * c;
    T mx = xr[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
    T sum = 0;
    for (int j = 0; j < c; ++j) sum += std::exp(xr[j] - mx);
    const T lse = mx + std::log(sum);
    T* orow = out.data() + std::int64_t(i) * c;
    for (int j = 0; j < c; ++j) orow[j] = xr[j] - lse;
  }
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, r, c] {
      xn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T* lp = on->value.data() + std::int64_t(i) * c;
        const T* dy = on->grad.data() + std::int64_t(i) * c;
        T sum_dy = 0;
        for (int j = 0; j < c; ++j) sum_dy += dy[j];
        T* dx = xn->grad.data() + std::int64_t(i) * c;
        for (int j = 0; j < c; ++j) dx[j] += dy[j] - std::exp(lp[j]) * sum_dy;
      }
    });
  }
  return out;
}

// Per-row cross-entropy with integer targets: out[i] = lse(x[i,:]) - x[i,t_i]
template <class T>
Tensor<T> cross_entropy_rows(const Tensor<T>& logits,
                             const std::vector<int>& targets) {
  check_rank(logits, 2, "cross_entropy_rows");
  const int r = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(targets.size()) != r)
    throw ShapeError("cross_entropy_rows: " + std::to_string(targets.size()) +
                     " targets vs logits " + shape_str(logits.shape()));
  for (int t : targets)
    if (t < 0 || t >= c)
      throw ShapeError("cross_entropy_rows: target " + std::to_string(t) +
                       " out of " + shape_str(logits.shape()));
  Tensor<T> out = Tensor<T>::zeros({r});
  for (int i = 0; i < r; ++i) {
    const T* xr = logits.data() + std::int64_t(i) * c;
    T mx = xr[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
    T sum = 0;
    for (int j = 0; j < c; ++j) sum += std::exp(xr[j] - mx);
    out.data()[i] = mx + std::log(sum) - xr[targets[i]];
  }
  if (recording<T>({&logits})) {
    mark_recorded(out);
    auto xn = logits.node(), on = out.node();
    Graph<T>::active()->record([xn, on, targets, r, c] {
      xn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T* xr = xn->value.data() + std::int64_t(i) * c;
        T mx = xr[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        T sum = 0;
        for (int j = 0; j < c; ++j) sum += std::exp(xr[j] - mx);
        const T g = on->grad[i];
        T* dx = xn->grad.data() + std::int64_t(i) * c;
        for (int j = 0; j < c; ++j)
          dx[j] += g * (std::exp(xr[j] - mx) / sum -
                        (j == targets[i] ? T(1) : T(0)));
      }
    });
  }
  return out;
}

// KL(p || q) per row for two probability tensors. 0 log 0 terms are dropped;
// q is clamped at eps inside the log to keep the value finite. Rows of p
// where p_j = 0 contribute no gradient to p_j (we take the 0 subgradient).
template <class T>
Tensor<T> kl_divergence_rows(const Tensor<T>& p, const Tensor<T>& q,
                             T eps = T(1e-12)) {
  check_same_shape(p, q, "kl_divergence_rows");
  check_rank(p, 2, "kl_divergence_rows");
  const int r = p.dim(0), c = p.dim(1);
  Tensor<T> out = Tensor<T>::zeros({r});
  for (int i = 0; i < r; ++i) {
    T acc = 0;
    for (int j = 0; j < c; ++j) {
      const T pv = p.data()[std::int64_t(i) * c + j];
      if (pv > 0) {
        const T qv = std::max(q.data()[std::int64_t(i) * c + j], eps);
        acc += pv * (std::log(pv) - std::log(qv));
      }
    }
    out.data()[i] = acc;
  }
  if (recording<T>({&p, &q})) {
    mark_recorded(out);
    auto pn = p.node(), qn = q.node(), on = out.node();
    bool gp = p.requires_grad(), gq = q.requires_grad();
    Graph<T>::active()->record([pn, qn, on, r, c, eps, gp, gq] {
      if (gp) pn->ensure_grad();
      if (gq) qn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T g = on->grad[i];
        for (int j = 0; j < c; ++j) {
          const std::int64_t off = std::int64_t(i) * c + j;
          const T pv = pn->value[off];
          if (pv <= 0) continue;
          const T qv = std::max(qn->value[off], eps);
          if (gp) pn->grad[off] += g * (std::log(pv) - std::log(qv) + T(1));
          if (gq) qn->grad[off] -= g * pv / qv;
        }
      }
    });
  }
  return out;
}

// KD building block: teacher probabilities are plain numbers (no grad),
// student supplies row-wise log-probabilities. out[i] = sum_j p[i,j] *
// (log p[i,j] - logq[i,j]), i.e. KL(p || softmax-student) per row.
template <class T>
Tensor<T> kd_rows(const std::vector<T>& teacher_probs, const Tensor<T>& log_q) {
  check_rank(log_q, 2, "kd_rows log_q");
  const int r = log_q.dim(0), c = log_q.dim(1);
  if (static_cast<std::int64_t>(teacher_probs.size()) !=
      static_cast<std::int64_t>(r) * c)
    throw ShapeError("kd_rows: teacher size " +
                     std::to_string(teacher_probs.size()) + " vs log_q " +
                     shape_str(log_q.shape()));
  Tensor<T> out = Tensor<T>::zeros({r});
  for (int i = 0; i < r; ++i) {
    T acc = 0;
    for (int j = 0; j < c; ++j) {
      const T pv = teacher_probs[std::size_t(i) * c + j];
      if (pv > 0)
        acc += pv * (std::log(pv) - log_q.data()[std::int64_t(i) * c + j]);
    }
    out.data()[i] = acc;
  }
  if (recording<T>({&log_q})) {
    mark_recorded(out);
    auto qn = log_q.node(), on = out.node();
    Graph<T>::active()->record([qn, on, teacher_probs, r, c] {
      qn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const T g = on->grad[i];
        for (int j = 0; j < c; ++j)
          qn->grad[std::int64_t(i) * c + j] -=
              g * teacher_probs[std::size_t(i) * c + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- reductions

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T acc = 0;
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc);
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, n] {
      xn->ensure_grad();
      const T g = on->grad[0];
      for (std::int64_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
  const std::int64_t n = x.size();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  T acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
  Tensor<T> out = Tensor<T>::scalar(acc / T(n));
  if (recording<T>({&x})) {
    mark_recorded(out);
    auto xn = x.node(), on = out.node();
    Graph<T>::active()->record([xn, on, n] {
      xn->ensure_grad();
      const T g = on->grad[0] / T(n);
      for (std::int64_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
  }
  return out;
}

// Mean of scalar parts, summed in ascending value order. Reordering the
// parts (e.g. shuffling permutation plans) therefore produces a bit-identical
// result. Backward is order-independent anyway: each part gets 1/P.
template <class T>
Tensor<T> mean_invariant(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeError("mean_invariant: empty input");
  std::vector<T> vals;
  vals.reserve(parts.size());
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.size() != 1)
      throw ShapeError("mean_invariant: parts must be scalars, got " +
                       shape_str(p.shape()));
    vals.push_back(p.data()[0]);
    any_grad = any_grad || p.requires_grad();
  }
  std::sort(vals.begin(), vals.end());
  T acc = 0;
  for (T v : vals) acc += v;
  const T denom = T(parts.size());
  Tensor<T> out = Tensor<T>::scalar(acc / denom);
  if (Graph<T>::active() && any_grad) {
    mark_recorded(out);
    std::vector<std::shared_ptr<TensorNode<T>>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    auto on = out.node();
    Graph<T>::active()->record([nodes, on, denom] {
      const T g = on->grad[0] / denom;
      for (auto& pn : nodes) {
        if (!pn->requires_grad) continue;
        pn->ensure_grad();
        pn->grad[0] += g;
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------- misc

// SwiGLU feed-forward: (silu(x Wg) * (x Wu)) Wd. No biases.
template <class T>
Tensor<T> swiglu(const Tensor<T>& x, const Tensor<T>& w_gate,
                 const Tensor<T>& w_up, const Tensor<T>& w_down) {
  return matmul(hadamard(silu(matmul(x, w_gate)), matmul(x, w_up)), w_down);
}

}  // namespace pldlab::ops
