#include "faircert/kernels/row_scan.hpp"

namespace faircert::kernels {

RowScanResult row_scan_scalar(const double* r, const double* sqrt_r,
                              const double* sqrt_1mr, std::int64_t n,
                              double base, double slope, double c0, double c1,
                              double thresh) {
  RowScanResult best;
  for (std::int64_t j = 0; j < n; ++j) {
    double con = c0 * sqrt_r[j] + c1 * sqrt_1mr[j];
    if (con >= thresh) {
      double obj = base + slope * r[j];
      if (best.index < 0 || obj > best.value) {
        best.index = j;
        best.value = obj;
      }
    }
  }
  return best;
}

RowScanFn row_scan_kernel() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return row_scan_avx2;
#endif
  return row_scan_scalar;
}

const char* row_scan_kernel_name() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return "avx2";
#endif
  return "scalar";
}

}  // namespace faircert::kernels
