#pragma once

#include <cstdint>

namespace saldiff::kern {

// Matrix kernels over raw row-major buffers. Each has a serial reference
// and an OpenMP version that splits output rows across threads. The inner
// accumulation order per output element is identical in both, so results
// are bitwise equal regardless of thread count.
//
// mm_nn: c[m,n] = a[m,k] * b[k,n]
// mm_nt: c[m,n] = a[m,k] * bt[n,k]^T   (bt stored row-major as [n,k])
// mm_tn: c[m,n] = at[k,m]^T * b[k,n]   (at stored row-major as [k,m])
// Variants with `_acc` add into c instead of overwriting.

void mm_nn_serial(const double* a, const double* b, double* c, int m, int k, int n);
void mm_nt_serial(const double* a, const double* bt, double* c, int m, int k, int n);
void mm_tn_serial(const double* at, const double* b, double* c, int m, int k, int n);

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n);
void mm_nt(const double* a, const double* bt, double* c, int m, int k, int n);
void mm_tn(const double* at, const double* b, double* c, int m, int k, int n);

void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n);
void mm_nt_acc(const double* a, const double* bt, double* c, int m, int k, int n);
void mm_tn_acc(const double* at, const double* b, double* c, int m, int k, int n);

// Row-wise softmax / layer norm over [rows, width] buffers (max-subtracted
// softmax; layer norm uses population variance, no affine).
void softmax_rows_serial(const double* x, double* y, int rows, int width);
void softmax_rows(const double* x, double* y, int rows, int width);
void layer_norm_rows_serial(const double* x, double* y, int rows, int width, double eps);
void layer_norm_rows(const double* x, double* y, int rows, int width, double eps);

// Active worker count the parallel kernels would use right now.
int worker_count();

}  // namespace saldiff::kern
