#pragma once

#include <optional>

namespace scatlab {

enum class KernelIsa { scalar, avx2 };

// Face coefficients of |g|^{1/2} G on an n x n node grid (row-major, index j*n + i):
// ax, cx at face (i+1/2, j); ay, cy at face (i, j+1/2). wgt = dt^2 / (h^2 |g|^{1/2}) at
// nodes that are updated, 0 elsewhere.
struct StencilArrays {
  const double* ax = nullptr;
  const double* ay = nullptr;
  const double* cx = nullptr;
  const double* cy = nullptr;
  const double* wgt = nullptr;
  int n = 0;
  bool cross = false;
};

// next = 2u - prev + wgt * div(a grad u) on rows [j0, j1), columns 1..n-2.
void leapfrog_rows(KernelIsa isa, const StencilArrays& s, const double* u, const double* prev,
                   double* next, int j0, int j1);

bool avx2_available();
// Best supported kernel, unless overridden.
KernelIsa active_kernel();
void set_kernel_override(std::optional<KernelIsa> isa);
const char* kernel_name(KernelIsa isa);

namespace detail {
void leapfrog_row_scalar(const StencilArrays& s, const double* u, const double* prev, double* next,
                         int j);
void leapfrog_row_avx2(const StencilArrays& s, const double* u, const double* prev, double* next,
                       int j);
}  // namespace detail

}  // namespace scatlab
