#include "locomanip/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace locomanip::kernels {

namespace {
std::atomic<bool> g_omp_enabled{true};
}

bool omp_enabled() {
#ifdef _OPENMP
  return g_omp_enabled.load();
#else
  return false;
#endif
}

void set_omp_enabled(bool on) { g_omp_enabled.store(on); }

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void linear_forward_serial(const double* X, const double* W, const double* b, double* Y, int m,
                           int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* x = X + static_cast<long>(i) * k;
    double* y = Y + static_cast<long>(i) * n;
    for (int o = 0; o < n; ++o) {
      const double* w = W + static_cast<long>(o) * k;
      double acc = b ? b[o] : 0.0;
      for (int j = 0; j < k; ++j) acc += x[j] * w[j];
      y[o] = acc;
    }
  }
}

void linear_forward_omp(const double* X, const double* W, const double* b, double* Y, int m, int k,
                        int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* x = X + static_cast<long>(i) * k;
    double* y = Y + static_cast<long>(i) * n;
    for (int o = 0; o < n; ++o) {
      const double* w = W + static_cast<long>(o) * k;
      double acc = b ? b[o] : 0.0;
      for (int j = 0; j < k; ++j) acc += x[j] * w[j];
      y[o] = acc;
    }
  }
}

void linear_forward(const double* X, const double* W, const double* b, double* Y, int m, int k,
                    int n) {
  if (omp_enabled())
    linear_forward_omp(X, W, b, Y, m, k, n);
  else
    linear_forward_serial(X, W, b, Y, m, k, n);
}

void linear_backward_input_serial(const double* dY, const double* W, double* dX, int m, int k,
                                  int n) {
  for (int i = 0; i < m; ++i) {
    const double* dy = dY + static_cast<long>(i) * n;
    double* dx = dX + static_cast<long>(i) * k;
    for (int j = 0; j < k; ++j) dx[j] = 0.0;
    for (int o = 0; o < n; ++o) {
      const double g = dy[o];
      const double* w = W + static_cast<long>(o) * k;
      for (int j = 0; j < k; ++j) dx[j] += g * w[j];
    }
  }
}

void linear_backward_input_omp(const double* dY, const double* W, double* dX, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* dy = dY + static_cast<long>(i) * n;
    double* dx = dX + static_cast<long>(i) * k;
    for (int j = 0; j < k; ++j) dx[j] = 0.0;
    for (int o = 0; o < n; ++o) {
      const double g = dy[o];
      const double* w = W + static_cast<long>(o) * k;
      for (int j = 0; j < k; ++j) dx[j] += g * w[j];
    }
  }
}

void linear_backward_input(const double* dY, const double* W, double* dX, int m, int k, int n) {
  if (omp_enabled())
    linear_backward_input_omp(dY, W, dX, m, k, n);
  else
    linear_backward_input_serial(dY, W, dX, m, k, n);
}

void linear_backward_params_serial(const double* dY, const double* X, double* dW, double* db, int m,
                                   int k, int n) {
  for (int o = 0; o < n; ++o) {
    double* dw = dW + static_cast<long>(o) * k;
    double dbo = 0.0;
    for (int i = 0; i < m; ++i) {
      const double g = dY[static_cast<long>(i) * n + o];
      const double* x = X + static_cast<long>(i) * k;
      dbo += g;
      for (int j = 0; j < k; ++j) dw[j] += g * x[j];
    }
    if (db) db[o] += dbo;
  }
}

void linear_backward_params_omp(const double* dY, const double* X, double* dW, double* db, int m,
                                int k, int n) {
#pragma omp parallel for schedule(static)
  for (int o = 0; o < n; ++o) {
    double* dw = dW + static_cast<long>(o) * k;
    double dbo = 0.0;
    for (int i = 0; i < m; ++i) {
      const double g = dY[static_cast<long>(i) * n + o];
      const double* x = X + static_cast<long>(i) * k;
      dbo += g;
      for (int j = 0; j < k; ++j) dw[j] += g * x[j];
    }
    if (db) db[o] += dbo;
  }
}

void linear_backward_params(const double* dY, const double* X, double* dW, double* db, int m, int k,
                            int n) {
  if (omp_enabled())
    linear_backward_params_omp(dY, X, dW, db, m, k, n);
  else
    linear_backward_params_serial(dY, X, dW, db, m, k, n);
}

void matmul_serial(const double* A, const double* B, double* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* c = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) c[j] = 0.0;
    const double* a = A + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

void matmul_omp(const double* A, const double* B, double* C, int m, int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* c = C + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) c[j] = 0.0;
    const double* a = A + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = a[p];
      const double* b = B + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) c[j] += av * b[j];
    }
  }
}

void matmul(const double* A, const double* B, double* C, int m, int k, int n) {
  if (omp_enabled())
    matmul_omp(A, B, C, m, k, n);
  else
    matmul_serial(A, B, C, m, k, n);
}

}  // namespace locomanip::kernels
