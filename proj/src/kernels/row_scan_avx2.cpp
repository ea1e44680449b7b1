#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "faircert/kernels/row_scan.hpp"

namespace faircert::kernels {

// Explicit mul/add only (no FMA), so each lane computes exactly the same
// IEEE sequence as the scalar kernel. Max-reduction is exact, and ties are
// resolved toward the smallest index both per lane and across lanes.
RowScanResult row_scan_avx2(const double* r, const double* sqrt_r,
                            const double* sqrt_1mr, std::int64_t n, double base,
                            double slope, double c0, double c1, double thresh) {
  const __m256d vbase = _mm256_set1_pd(base);
  const __m256d vslope = _mm256_set1_pd(slope);
  const __m256d vc0 = _mm256_set1_pd(c0);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vthresh = _mm256_set1_pd(thresh);
  const __m256d vninf = _mm256_set1_pd(-__builtin_huge_val());

  __m256d best_val = vninf;
  __m256i best_idx = _mm256_set1_epi64x(-1);
  __m256i idx = _mm256_setr_epi64x(0, 1, 2, 3);
  const __m256i idx_step = _mm256_set1_epi64x(4);

  std::int64_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d vr = _mm256_loadu_pd(r + j);
    __m256d vsr = _mm256_loadu_pd(sqrt_r + j);
    __m256d vs1 = _mm256_loadu_pd(sqrt_1mr + j);
    __m256d con = _mm256_add_pd(_mm256_mul_pd(vc0, vsr), _mm256_mul_pd(vc1, vs1));
    __m256d feas = _mm256_cmp_pd(con, vthresh, _CMP_GE_OQ);
    __m256d obj = _mm256_add_pd(vbase, _mm256_mul_pd(vslope, vr));
    // Strict > keeps the first occurrence within each lane.
    __m256d better =
        _mm256_and_pd(feas, _mm256_cmp_pd(obj, best_val, _CMP_GT_OQ));
    best_val = _mm256_blendv_pd(best_val, obj, better);
    best_idx = _mm256_castpd_si256(_mm256_blendv_pd(
        _mm256_castsi256_pd(best_idx), _mm256_castsi256_pd(idx), better));
    idx = _mm256_add_epi64(idx, idx_step);
  }

  alignas(32) double vals[4];
  alignas(32) std::int64_t idxs[4];
  _mm256_store_pd(vals, best_val);
  _mm256_store_si256(reinterpret_cast<__m256i*>(idxs), best_idx);

  RowScanResult best;
  for (int lane = 0; lane < 4; ++lane) {
    if (idxs[lane] < 0) continue;
    if (best.index < 0 || vals[lane] > best.value ||
        (vals[lane] == best.value && idxs[lane] < best.index)) {
      best.index = idxs[lane];
      best.value = vals[lane];
    }
  }
  // Tail indices all exceed the vector ones, so strict > suffices.
  for (; j < n; ++j) {
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

}  // namespace faircert::kernels

#endif
