#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "faircert/kernels/row_scan.hpp"

using namespace faircert::kernels;

namespace {

struct Row {
  std::vector<double> r, sqrt_r, sqrt_1mr;
};

Row make_row(std::mt19937_64& rng, long n) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Row row;
  row.r.resize(n);
  for (auto& v : row.r) v = unif(rng);
  row.sqrt_r.resize(n);
  row.sqrt_1mr.resize(n);
  for (long j = 0; j < n; ++j) {
    row.sqrt_r[j] = std::sqrt(row.r[j]);
    row.sqrt_1mr[j] = std::sqrt(1.0 - row.r[j]);
  }
  return row;
}

}  // namespace

TEST_CASE("scalar row scan picks the first feasible maximum") {
  std::vector<double> r{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> sr(5), s1(5);
  for (int j = 0; j < 5; ++j) {
    sr[j] = std::sqrt(r[j]);
    s1[j] = std::sqrt(1.0 - r[j]);
  }
  // always feasible, increasing objective
  auto res = row_scan_scalar(r.data(), sr.data(), s1.data(), 5, 0.0, 1.0, 1.0,
                             1.0, 0.0);
  CHECK(res.index == 4);
  CHECK(res.value == 1.0);
  // constant objective: ties break to the first index
  res = row_scan_scalar(r.data(), sr.data(), s1.data(), 5, 0.3, 0.0, 1.0, 1.0,
                        0.0);
  CHECK(res.index == 0);
  CHECK(res.value == 0.3);
  // infeasible threshold
  res = row_scan_scalar(r.data(), sr.data(), s1.data(), 5, 0.0, 1.0, 1.0, 1.0,
                        99.0);
  CHECK(res.index == -1);
}

TEST_CASE("avx2 kernel matches scalar bit for bit") {
#if defined(__x86_64__) || defined(_M_X64)
  if (std::string(row_scan_kernel_name()) != "avx2") {
    MESSAGE("avx2 unavailable on this host; dispatch test only");
    CHECK(row_scan_kernel() == row_scan_scalar);
    return;
  }
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int it = 0; it < 300; ++it) {
    long n = 1 + static_cast<long>(unif(rng) * 300);
    Row row = make_row(rng, n);
    double base = unif(rng), slope = 2.0 * unif(rng) - 1.0;
    double c0 = unif(rng), c1 = unif(rng);
    // threshold straddles the attainable range to exercise the mask
    double thresh = unif(rng) * (c0 + c1) * 1.1;
    auto a = row_scan_scalar(row.r.data(), row.sqrt_r.data(),
                             row.sqrt_1mr.data(), n, base, slope, c0, c1,
                             thresh);
    auto b = row_scan_avx2(row.r.data(), row.sqrt_r.data(), row.sqrt_1mr.data(),
                           n, base, slope, c0, c1, thresh);
    CHECK(a.index == b.index);
    CHECK(a.value == b.value);  // exact: same arithmetic on both paths
  }
  // exact ties across lanes: duplicate r values with zero slope
  for (int it = 0; it < 50; ++it) {
    long n = 64;
    Row row = make_row(rng, 8);
    for (int rep = 1; rep < 8; ++rep)
      for (int j = 0; j < 8; ++j) {
        row.r.push_back(row.r[j]);
        row.sqrt_r.push_back(row.sqrt_r[j]);
        row.sqrt_1mr.push_back(row.sqrt_1mr[j]);
      }
    auto a = row_scan_scalar(row.r.data(), row.sqrt_r.data(),
                             row.sqrt_1mr.data(), n, 0.5, 0.0, 1.0, 1.0, 1.0);
    auto b = row_scan_avx2(row.r.data(), row.sqrt_r.data(), row.sqrt_1mr.data(),
                           n, 0.5, 0.0, 1.0, 1.0, 1.0);
    CHECK(a.index == b.index);
    CHECK(a.value == b.value);
  }
#else
  CHECK(row_scan_kernel() == row_scan_scalar);
#endif
}

TEST_CASE("dispatch returns a working kernel") {
  auto fn = row_scan_kernel();
  std::vector<double> r{0.5}, sr{std::sqrt(0.5)}, s1{std::sqrt(0.5)};
  auto res = fn(r.data(), sr.data(), s1.data(), 1, 1.0, 2.0, 1.0, 1.0, 0.0);
  CHECK(res.index == 0);
  CHECK(res.value == 2.0);
}
