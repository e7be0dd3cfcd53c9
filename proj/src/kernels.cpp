#include "scatlab/kernels.hpp"

#include <atomic>
#include <stdexcept>

namespace scatlab {

namespace {
std::atomic<int> g_override{-1};
}

namespace detail {

void leapfrog_row_scalar(const StencilArrays& s, const double* u, const double* prev, double* next,
                         int j) {
  const int n = s.n;
  const std::size_t row = static_cast<std::size_t>(j) * n;
  for (int i = 1; i < n - 1; ++i) {
    const std::size_t k = row + i;
    const double c = u[k];
    double fxp = s.ax[k] * (u[k + 1] - c);
    double fxm = s.ax[k - 1] * (c - u[k - 1]);
    double fyp = s.ay[k] * (u[k + n] - c);
    double fym = s.ay[k - n] * (c - u[k - n]);
    if (s.cross) {
      fxp = fxp + s.cx[k] * (0.25 * ((u[k + n] + u[k + n + 1]) - (u[k - n] + u[k - n + 1])));
      fxm = fxm + s.cx[k - 1] * (0.25 * ((u[k + n - 1] + u[k + n]) - (u[k - n - 1] + u[k - n])));
      fyp = fyp + s.cy[k] * (0.25 * ((u[k + 1] + u[k + n + 1]) - (u[k - 1] + u[k + n - 1])));
      fym = fym + s.cy[k - n] * (0.25 * ((u[k - n + 1] + u[k + 1]) - (u[k - n - 1] + u[k - 1])));
    }
    const double lap = (fxp - fxm) + (fyp - fym);
    next[k] = (2.0 * c - prev[k]) + s.wgt[k] * lap;
  }
}

}  // namespace detail

bool avx2_available() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

KernelIsa active_kernel() {
  int o = g_override.load();
  if (o >= 0) return static_cast<KernelIsa>(o);
  return avx2_available() ? KernelIsa::avx2 : KernelIsa::scalar;
}

void set_kernel_override(std::optional<KernelIsa> isa) {
  if (isa && *isa == KernelIsa::avx2 && !avx2_available())
    throw std::runtime_error("AVX2 kernel requested on a CPU without AVX2");
  g_override.store(isa ? static_cast<int>(*isa) : -1);
}

const char* kernel_name(KernelIsa isa) { return isa == KernelIsa::avx2 ? "avx2" : "scalar"; }

void leapfrog_rows(KernelIsa isa, const StencilArrays& s, const double* u, const double* prev,
                   double* next, int j0, int j1) {
  if (j0 < 1) j0 = 1;
  if (j1 > s.n - 1) j1 = s.n - 1;
  if (isa == KernelIsa::avx2) {
    for (int j = j0; j < j1; ++j) detail::leapfrog_row_avx2(s, u, prev, next, j);
  } else {
    for (int j = j0; j < j1; ++j) detail::leapfrog_row_scalar(s, u, prev, next, j);
  }
}

}  // namespace scatlab
