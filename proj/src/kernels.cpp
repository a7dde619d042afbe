#include "saldiff/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace saldiff::kern {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr int64_t kParallelCutoff = 1 << 17;

bool go_parallel(int64_t work) {
#ifdef _OPENMP
    return work >= kParallelCutoff && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
    (void)work;
    return false;
#endif
}

inline void mm_nn_rows(const double* a, const double* b, double* c, int k, int n, int r0, int r1,
                       bool acc) {
    for (int i = r0; i < r1; ++i) {
        double* ci = c + static_cast<int64_t>(i) * n;
        if (!acc) std::memset(ci, 0, sizeof(double) * n);
        const double* ai = a + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

inline void mm_nt_rows(const double* a, const double* bt, double* c, int k, int n, int r0, int r1,
                       bool acc) {
    for (int i = r0; i < r1; ++i) {
        const double* ai = a + static_cast<int64_t>(i) * k;
        double* ci = c + static_cast<int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = bt + static_cast<int64_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = acc ? ci[j] + s : s;
        }
    }
}

}  // namespace

void mm_nn_serial(const double* a, const double* b, double* c, int m, int k, int n) {
    mm_nn_rows(a, b, c, k, n, 0, m, false);
}

void mm_nt_serial(const double* a, const double* bt, double* c, int m, int k, int n) {
    mm_nt_rows(a, bt, c, k, n, 0, m, false);
}

void mm_tn_serial(const double* at, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* ci = c + static_cast<int64_t>(i) * n;
        std::memset(ci, 0, sizeof(double) * n);
        for (int p = 0; p < k; ++p) {
            const double av = at[static_cast<int64_t>(p) * m + i];
            const double* bp = b + static_cast<int64_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nn_rows(a, b, c, k, n, i, i + 1, false);
    } else {
        mm_nn_rows(a, b, c, k, n, 0, m, false);
    }
}

void mm_nt(const double* a, const double* bt, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nt_rows(a, bt, c, k, n, i, i + 1, false);
    } else {
        mm_nt_rows(a, bt, c, k, n, 0, m, false);
    }
}

void mm_tn(const double* at, const double* b, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            std::memset(ci, 0, sizeof(double) * n);
            for (int p = 0; p < k; ++p) {
                const double av = at[static_cast<int64_t>(p) * m + i];
                const double* bp = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else {
        mm_tn_serial(at, b, c, m, k, n);
    }
}

void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nn_rows(a, b, c, k, n, i, i + 1, true);
    } else {
        mm_nn_rows(a, b, c, k, n, 0, m, true);
    }
}

void mm_nt_acc(const double* a, const double* bt, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) mm_nt_rows(a, bt, c, k, n, i, i + 1, true);
    } else {
        mm_nt_rows(a, bt, c, k, n, 0, m, true);
    }
}

void mm_tn_acc(const double* at, const double* b, double* c, int m, int k, int n) {
    if (go_parallel(static_cast<int64_t>(m) * k * n)) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int p = 0; p < k; ++p) {
                const double av = at[static_cast<int64_t>(p) * m + i];
                const double* bp = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    } else {
        for (int i = 0; i < m; ++i) {
            double* ci = c + static_cast<int64_t>(i) * n;
            for (int p = 0; p < k; ++p) {
                const double av = at[static_cast<int64_t>(p) * m + i];
                const double* bp = b + static_cast<int64_t>(p) * n;
                for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    }
}

void softmax_rows_serial(const double* x, double* y, int rows, int width) {
    for (int r = 0; r < rows; ++r) {
        const double* xr = x + static_cast<int64_t>(r) * width;
        double* yr = y + static_cast<int64_t>(r) * width;
        double mx = xr[0];
        for (int i = 1; i < width; ++i) mx = std::max(mx, xr[i]);
        double sum = 0.0;
        for (int i = 0; i < width; ++i) {
            yr[i] = std::exp(xr[i] - mx);
            sum += yr[i];
        }
        const double inv = 1.0 / sum;
        for (int i = 0; i < width; ++i) yr[i] *= inv;
    }
}

void softmax_rows(const double* x, double* y, int rows, int width) {
    if (go_parallel(static_cast<int64_t>(rows) * width * 8)) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r) softmax_rows_serial(x + static_cast<int64_t>(r) * width,
                                                           y + static_cast<int64_t>(r) * width, 1,
                                                           width);
    } else {
        softmax_rows_serial(x, y, rows, width);
    }
}

void layer_norm_rows_serial(const double* x, double* y, int rows, int width, double eps) {
    for (int r = 0; r < rows; ++r) {
        const double* xr = x + static_cast<int64_t>(r) * width;
        double* yr = y + static_cast<int64_t>(r) * width;
        double mean = 0.0;
        for (int i = 0; i < width; ++i) mean += xr[i];
        mean /= width;
        double var = 0.0;
        for (int i = 0; i < width; ++i) {
            const double d = xr[i] - mean;
            var += d * d;
        }
        var /= width;
        const double rstd = 1.0 / std::sqrt(var + eps);
        for (int i = 0; i < width; ++i) yr[i] = (xr[i] - mean) * rstd;
    }
}

void layer_norm_rows(const double* x, double* y, int rows, int width, double eps) {
    if (go_parallel(static_cast<int64_t>(rows) * width * 8)) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r)
            layer_norm_rows_serial(x + static_cast<int64_t>(r) * width,
                                   y + static_cast<int64_t>(r) * width, 1, width, eps);
    } else {
        layer_norm_rows_serial(x, y, rows, width, eps);
    }
}

int worker_count() {
#ifdef _OPENMP
    return omp_in_parallel() ? 1 : omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace saldiff::kern
