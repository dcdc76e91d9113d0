#pragma once

namespace locomanip::kernels {

// Dense kernels behind the network layers. Each has a serial reference and
// an OpenMP variant; the OpenMP loops are arranged so every output element
// is accumulated by exactly one thread in a fixed order, which keeps results
// bit-identical to the serial path for any thread count.

bool omp_enabled();
void set_omp_enabled(bool on);
int thread_count();

// Y[m x n] = X[m x k] * W^T + b, with W stored [n x k] (one row per output).
// b may be null.
void linear_forward_serial(const double* X, const double* W, const double* b, double* Y, int m,
                           int k, int n);
void linear_forward_omp(const double* X, const double* W, const double* b, double* Y, int m, int k,
                        int n);
void linear_forward(const double* X, const double* W, const double* b, double* Y, int m, int k,
                    int n);

// dX[m x k] = dY[m x n] * W[n x k].
void linear_backward_input_serial(const double* dY, const double* W, double* dX, int m, int k,
                                  int n);
void linear_backward_input_omp(const double* dY, const double* W, double* dX, int m, int k, int n);
void linear_backward_input(const double* dY, const double* W, double* dX, int m, int k, int n);

// dW[n x k] += dY^T * X and db[n] += column sums of dY. db may be null.
void linear_backward_params_serial(const double* dY, const double* X, double* dW, double* db, int m,
                                   int k, int n);
void linear_backward_params_omp(const double* dY, const double* X, double* dW, double* db, int m,
                                int k, int n);
void linear_backward_params(const double* dY, const double* X, double* dW, double* db, int m, int k,
                            int n);

// C[m x n] = A[m x k] * B[k x n].
void matmul_serial(const double* A, const double* B, double* C, int m, int k, int n);
void matmul_omp(const double* A, const double* B, double* C, int m, int k, int n);
void matmul(const double* A, const double* B, double* C, int m, int k, int n);

}  // namespace locomanip::kernels
