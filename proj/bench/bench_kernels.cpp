// Timing harness for the dense kernels: serial reference vs the OpenMP
// variants, with a bit-exactness check on every case. Run with no arguments
// for the default size grid; pass m k n to time a single case.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "locomanip/kernels.hpp"
#include "locomanip/rng.hpp"

using locomanip::Rng;
namespace k = locomanip::kernels;

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(int iters, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

struct Case {
  int m, kk, n;
};

void bench_case(const Case& c, Rng& rng) {
  const int m = c.m, kk = c.kk, n = c.n;
  std::vector<double> X(static_cast<size_t>(m) * kk), W(static_cast<size_t>(n) * kk), b(n);
  std::vector<double> Ys(static_cast<size_t>(m) * n), Yp(Ys.size());
  std::vector<double> dY(static_cast<size_t>(m) * n), dXs(X.size()), dXp(X.size());
  std::vector<double> dWs(W.size(), 0.0), dWp(W.size(), 0.0), dbs(n, 0.0), dbp(n, 0.0);
  for (auto& v : X) v = rng.normal();
  for (auto& v : W) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto& v : dY) v = rng.normal();

  const int iters = std::max(1, 2000000 / (m * kk * n / 64 + 1));

  const double t_fs = time_ms(iters, [&] {
    k::linear_forward_serial(X.data(), W.data(), b.data(), Ys.data(), m, kk, n);
  });
  const double t_fp = time_ms(iters, [&] {
    k::linear_forward_omp(X.data(), W.data(), b.data(), Yp.data(), m, kk, n);
  });
  const double t_is = time_ms(iters, [&] {
    k::linear_backward_input_serial(dY.data(), W.data(), dXs.data(), m, kk, n);
  });
  const double t_ip = time_ms(iters, [&] {
    k::linear_backward_input_omp(dY.data(), W.data(), dXp.data(), m, kk, n);
  });
  const double t_ps = time_ms(iters, [&] {
    std::fill(dWs.begin(), dWs.end(), 0.0);
    std::fill(dbs.begin(), dbs.end(), 0.0);
    k::linear_backward_params_serial(dY.data(), X.data(), dWs.data(), dbs.data(), m, kk, n);
  });
  const double t_pp = time_ms(iters, [&] {
    std::fill(dWp.begin(), dWp.end(), 0.0);
    std::fill(dbp.begin(), dbp.end(), 0.0);
    k::linear_backward_params_omp(dY.data(), X.data(), dWp.data(), dbp.data(), m, kk, n);
  });

  const bool ok = bit_equal(Ys, Yp) && bit_equal(dXs, dXp) && bit_equal(dWs, dWp) &&
                  bit_equal(dbs, dbp);

  std::printf("%5d x %4d x %4d  fwd %8.4f / %8.4f ms (x%.2f)  dx %8.4f / %8.4f (x%.2f)  "
              "dw %8.4f / %8.4f (x%.2f)  %s\n",
              m, kk, n, t_fs, t_fp, t_fp > 0 ? t_fs / t_fp : 0.0, t_is, t_ip,
              t_ip > 0 ? t_is / t_ip : 0.0, t_ps, t_pp, t_pp > 0 ? t_ps / t_pp : 0.0,
              ok ? "bit-exact" : "MISMATCH");
  if (!ok) std::exit(1);
}

}  // namespace

int main(int argc, char** argv) {
  Rng rng(42);
  std::printf("threads: %d (set OMP_NUM_THREADS to vary)\n", k::thread_count());
  std::printf("%5s   %4s   %4s  %s\n", "m", "k", "n",
              "serial / omp per call, speedup, and a bit-exactness verdict");

  if (argc == 4) {
    bench_case({std::atoi(argv[1]), std::atoi(argv[2]), std::atoi(argv[3])}, rng);
    return 0;
  }
  const Case grid[] = {
      {64, 171, 128}, {64, 128, 128}, {96, 119, 128}, {256, 128, 128},
      {32, 48, 192},  {256, 48, 48},  {512, 256, 256},
  };
  for (const auto& c : grid) bench_case(c, rng);
  return 0;
}
