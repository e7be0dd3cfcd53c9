#include "scatlab/kernels.hpp"

#include <stdexcept>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define SCATLAB_HAVE_X86 1
#endif

namespace scatlab::detail {

#ifdef SCATLAB_HAVE_X86

// Same operation order as the scalar row, four columns at a time; no FMA so results match bitwise.
__attribute__((target("avx2"))) void leapfrog_row_avx2(const StencilArrays& s, const double* u,
                                                       const double* prev, double* next, int j) {
  const int n = s.n;
  const std::size_t row = static_cast<std::size_t>(j) * n;
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d quarter = _mm256_set1_pd(0.25);
  int i = 1;
  for (; i + 4 <= n - 1; i += 4) {
    const std::size_t k = row + i;
    const __m256d c = _mm256_loadu_pd(u + k);
    const __m256d ue = _mm256_loadu_pd(u + k + 1);
    const __m256d uw = _mm256_loadu_pd(u + k - 1);
    const __m256d un = _mm256_loadu_pd(u + k + n);
    const __m256d us = _mm256_loadu_pd(u + k - n);
    __m256d fxp = _mm256_mul_pd(_mm256_loadu_pd(s.ax + k), _mm256_sub_pd(ue, c));
    __m256d fxm = _mm256_mul_pd(_mm256_loadu_pd(s.ax + k - 1), _mm256_sub_pd(c, uw));
    __m256d fyp = _mm256_mul_pd(_mm256_loadu_pd(s.ay + k), _mm256_sub_pd(un, c));
    __m256d fym = _mm256_mul_pd(_mm256_loadu_pd(s.ay + k - n), _mm256_sub_pd(c, us));
    if (s.cross) {
      const __m256d une = _mm256_loadu_pd(u + k + n + 1);
      const __m256d unw = _mm256_loadu_pd(u + k + n - 1);
      const __m256d use = _mm256_loadu_pd(u + k - n + 1);
      const __m256d usw = _mm256_loadu_pd(u + k - n - 1);
      fxp = _mm256_add_pd(
          fxp, _mm256_mul_pd(_mm256_loadu_pd(s.cx + k),
                             _mm256_mul_pd(quarter, _mm256_sub_pd(_mm256_add_pd(un, une),
                                                                  _mm256_add_pd(us, use)))));
      fxm = _mm256_add_pd(
          fxm, _mm256_mul_pd(_mm256_loadu_pd(s.cx + k - 1),
                             _mm256_mul_pd(quarter, _mm256_sub_pd(_mm256_add_pd(unw, un),
                                                                  _mm256_add_pd(usw, us)))));
      fyp = _mm256_add_pd(
          fyp, _mm256_mul_pd(_mm256_loadu_pd(s.cy + k),
                             _mm256_mul_pd(quarter, _mm256_sub_pd(_mm256_add_pd(ue, une),
                                                                  _mm256_add_pd(uw, unw)))));
      fym = _mm256_add_pd(
          fym, _mm256_mul_pd(_mm256_loadu_pd(s.cy + k - n),
                             _mm256_mul_pd(quarter, _mm256_sub_pd(_mm256_add_pd(use, ue),
                                                                  _mm256_add_pd(usw, uw)))));
    }
    const __m256d lap = _mm256_add_pd(_mm256_sub_pd(fxp, fxm), _mm256_sub_pd(fyp, fym));
    const __m256d base = _mm256_sub_pd(_mm256_mul_pd(two, c), _mm256_loadu_pd(prev + k));
    _mm256_storeu_pd(next + k, _mm256_add_pd(base, _mm256_mul_pd(_mm256_loadu_pd(s.wgt + k), lap)));
  }
  for (; i < n - 1; ++i) {
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

#else

void leapfrog_row_avx2(const StencilArrays&, const double*, const double*, double*, int) {
  throw std::runtime_error("AVX2 kernel not built for this architecture");
}

#endif

}  // namespace scatlab::detail
