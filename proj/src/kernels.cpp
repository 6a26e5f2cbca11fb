#include "pldlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pldlab::kernels {

namespace {

int g_threads = 0;  // 0 = not resolved yet

int resolve_default_threads() {
  if (const char* env = std::getenv("PLDLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

// Splits [0, n) into contiguous column blocks, one per thread, and runs
// body(j0, j1) on each. body must touch only columns [j0, j1) of the output,
// with the same per-element arithmetic order as the full-range serial call;
// that is what makes parallel == serial bitwise.
template <class Body>
void parallel_columns(int n, std::int64_t macs, const Body& body) {
  int nt = num_threads();
  if (nt <= 1 || macs < kParallelMacThreshold || n < 2) {
    body(0, n);
    return;
  }
  nt = std::min(nt, n);
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
  {
    const int t = omp_get_thread_num();
    const int actual = omp_get_num_threads();
    const int chunk = (n + actual - 1) / actual;
    const int j0 = std::min(n, t * chunk);
    const int j1 = std::min(n, j0 + chunk);
    if (j0 < j1) body(j0, j1);
  }
#else
  body(0, n);
#endif
}

template <class T>
void zero_columns(T* c, int m, int n, int j0, int j1) {
  for (int i = 0; i < m; ++i)
    std::fill(c + static_cast<std::int64_t>(i) * n + j0,
              c + static_cast<std::int64_t>(i) * n + j1, T(0));
}

// ----- column-range workers ------------------------------------------------

template <class T>
void nn_worker(const T* __restrict a, const T* __restrict b, T* __restrict c,
               int m, int k, int n, bool accumulate, int j0, int j1) {
  if (!accumulate) zero_columns(c, m, n, j0, j1);
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const T aik = arow[kk];
      const T* brow = b + static_cast<std::int64_t>(kk) * n;
      for (int j = j0; j < j1; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <class T>
void nt_worker(const T* __restrict a, const T* __restrict b, T* __restrict c,
               int m, int k, int n, bool accumulate, int j0, int j1) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    T* crow = c + static_cast<std::int64_t>(i) * n;
    for (int j = j0; j < j1; ++j) {
      const T* brow = b + static_cast<std::int64_t>(j) * k;
      T acc = 0;
      // the simd reduction licenses a vectorized partial-sum order; it is
      // fixed by the build, identical in the serial and parallel variants
      // (the column split never touches this inner loop), and lives entirely
      // inside one output element, so variant bit-equality is unaffected
#pragma omp simd reduction(+ : acc)
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

template <class T>
void tn_worker(const T* __restrict a, const T* __restrict b, T* __restrict c,
               int m, int k, int n, bool accumulate, int j0, int j1) {
  if (!accumulate) zero_columns(c, k, n, j0, j1);
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::int64_t>(i) * k;
    const T* brow = b + static_cast<std::int64_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const T aik = arow[kk];
      T* crow = c + static_cast<std::int64_t>(kk) * n;
      for (int j = j0; j < j1; ++j) crow[j] += aik * brow[j];
    }
  }
}

template <class T>
void softmax_row(const T* x, T* y, int n) {
  T mx = x[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
  T sum = 0;
  for (int j = 0; j < n; ++j) {
    y[j] = std::exp(x[j] - mx);
    sum += y[j];
  }
  const T inv = T(1) / sum;
  for (int j = 0; j < n; ++j) y[j] *= inv;
}

}  // namespace

int num_threads() {
  if (g_threads == 0) g_threads = resolve_default_threads();
  return g_threads;
}

void set_num_threads(int n) { g_threads = n > 0 ? n : resolve_default_threads(); }

template <class T>
void gemm_nn_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate) {
  nn_worker(a, b, c, m, k, n, accumulate, 0, n);
}

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate) {
  const std::int64_t macs = std::int64_t(m) * k * n;
  parallel_columns(n, macs, [&](int j0, int j1) {
    nn_worker(a, b, c, m, k, n, accumulate, j0, j1);
  });
}

template <class T>
void gemm_nt_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate) {
  nt_worker(a, b, c, m, k, n, accumulate, 0, n);
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate) {
  const std::int64_t macs = std::int64_t(m) * k * n;
  parallel_columns(n, macs, [&](int j0, int j1) {
    nt_worker(a, b, c, m, k, n, accumulate, j0, j1);
  });
}

template <class T>
void gemm_tn_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate) {
  tn_worker(a, b, c, m, k, n, accumulate, 0, n);
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate) {
  const std::int64_t macs = std::int64_t(m) * k * n;
  parallel_columns(n, macs, [&](int j0, int j1) {
    tn_worker(a, b, c, m, k, n, accumulate, j0, j1);
  });
}

template <class T>
void softmax_rows_serial(const T* x, T* y, int rows, int n) {
  for (int r = 0; r < rows; ++r)
    softmax_row(x + static_cast<std::int64_t>(r) * n,
                y + static_cast<std::int64_t>(r) * n, n);
}

template <class T>
void softmax_rows(const T* x, T* y, int rows, int n) {
  const std::int64_t work = std::int64_t(rows) * n * 4;
  int nt = num_threads();
  if (nt <= 1 || work < kParallelMacThreshold || rows < 2) {
    softmax_rows_serial(x, y, rows, n);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(std::min(nt, rows))
  for (int r = 0; r < rows; ++r)
    softmax_row(x + static_cast<std::int64_t>(r) * n,
                y + static_cast<std::int64_t>(r) * n, n);
#else
  softmax_rows_serial(x, y, rows, n);
#endif
}

// explicit instantiations for the two scalar types the library uses
#define PLDLAB_INSTANTIATE(T)                                                \
  template void gemm_nn_serial<T>(const T*, const T*, T*, int, int, int,    \
                                  bool);                                     \
  template void gemm_nn<T>(const T*, const T*, T*, int, int, int, bool);    \
  template void gemm_nt_serial<T>(const T*, const T*, T*, int, int, int,    \
                                  bool);                                     \
  template void gemm_nt<T>(const T*, const T*, T*, int, int, int, bool);    \
  template void gemm_tn_serial<T>(const T*, const T*, T*, int, int, int,    \
                                  bool);                                     \
  template void gemm_tn<T>(const T*, const T*, T*, int, int, int, bool);    \
  template void softmax_rows_serial<T>(const T*, T*, int, int);             \
  template void softmax_rows<T>(const T*, T*, int, int);

PLDLAB_INSTANTIATE(float)
PLDLAB_INSTANTIATE(double)
#undef PLDLAB_INSTANTIATE

}  // namespace pldlab::kernels
