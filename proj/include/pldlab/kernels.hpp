#pragma once

#include <cstdint>

namespace pldlab::kernels {

// Number of worker threads the parallel kernels will use. Defaults to the
// PLDLAB_THREADS environment variable if set, otherwise the hardware count.
int num_threads();
// n <= 0 resets to the default resolution described above.
void set_num_threads(int n);

// Work (in multiply-accumulates) below which the parallel entry points fall
// back to the serial path; forking threads for tiny matrices costs more than
// the loop itself.
inline constexpr std::int64_t kParallelMacThreshold = 1 << 16;

// Matrix kernels, row-major, f32/f64. Each comes in a *_serial reference
// variant and a parallel variant. The parallel variants split the OUTPUT
// COLUMNS across threads and run the identical per-column loop nest, so the
// floating-point result is bit-identical to the serial variant at any thread
// count. Tests rely on that equality; do not "optimize" it away.
//
// gemm_nn: C[m,n] (+)= A[m,k] * B[k,n]
// gemm_nt: C[m,n] (+)= A[m,k] * B[n,k]^T
// gemm_tn: C[k,n] (+)= A[m,k]^T * B[m,n]
// accumulate=false overwrites C, true adds into it.

template <class T>
void gemm_nn_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate = false);
template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate = false);

template <class T>
void gemm_nt_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate = false);
template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate = false);

template <class T>
void gemm_tn_serial(const T* a, const T* b, T* c, int m, int k, int n,
                    bool accumulate = false);
template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n,
             bool accumulate = false);

// Row-wise stable softmax: y[r,:] = softmax(x[r,:]). Rows are independent, so
// the parallel variant splits rows and stays bit-identical to serial.
template <class T>
void softmax_rows_serial(const T* x, T* y, int rows, int n);
template <class T>
void softmax_rows(const T* x, T* y, int rows, int n);

}  // namespace pldlab::kernels
