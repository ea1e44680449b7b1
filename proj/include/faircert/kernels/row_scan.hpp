#pragma once

#include <cstdint>

namespace faircert::kernels {

/// One row of the bilinear certificate grid scan. For a fixed k the
/// objective is affine in r and the distance term collapses to two
/// coefficients, so a row reduces to
///   maximize  base + slope * r[j]
///   over      j with c0 * sqrt_r[j] + c1 * sqrt_1mr[j] >= thresh.
/// Returns the best feasible index (ties -> smallest index) or -1.
struct RowScanResult {
  std::int64_t index = -1;
  double value = 0.0;
};

using RowScanFn = RowScanResult (*)(const double* r, const double* sqrt_r,
                                    const double* sqrt_1mr, std::int64_t n,
                                    double base, double slope, double c0,
                                    double c1, double thresh);

RowScanResult row_scan_scalar(const double* r, const double* sqrt_r,
                              const double* sqrt_1mr, std::int64_t n,
                              double base, double slope, double c0, double c1,
                              double thresh);

#if defined(__x86_64__) || defined(_M_X64)
// Bit-identical to the scalar kernel: both are compiled without FP
// contraction and max-reduction is exact.
RowScanResult row_scan_avx2(const double* r, const double* sqrt_r,
                            const double* sqrt_1mr, std::int64_t n, double base,
                            double slope, double c0, double c1, double thresh);
#endif

/// Best kernel supported by the executing CPU.
RowScanFn row_scan_kernel();
const char* row_scan_kernel_name();

}  // namespace faircert::kernels
