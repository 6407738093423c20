#include "gmclab/simd/kernels.hpp"

#include <cmath>
#include <limits>

namespace gmclab::simd {
namespace {

constexpr std::size_t kBlock = 1024;

// Sums of many positive terms are accumulated block-wise and the block sums
// combined pairwise, bounding the rounding error at ~(block + log2(n)) ulp.
template <class Term>
double blocked_sum(std::size_t n, Term term) {
  double blocks[64];
  std::size_t nblocks = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t end = i + kBlock < n ? i + kBlock : n;
    double acc = 0.0;
    for (; i < end; ++i) acc += term(i);
    blocks[nblocks++] = acc;
    if (nblocks == 64) {  // fold to keep the buffer small
      for (std::size_t k = 0; k < 32; ++k) blocks[k] = blocks[2 * k] + blocks[2 * k + 1];
      nblocks = 32;
    }
  }
  for (std::size_t width = 1; width < nblocks; width *= 2)
    for (std::size_t k = 0; k + width < nblocks; k += 2 * width)
      blocks[k] += blocks[k + width];
  return nblocks ? blocks[0] : 0.0;
}

double s_reduce_max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double s_reduce_max_affine2(const double* x, const double* f, std::size_t n,
                            double a, double b) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double v = a * x[i] + b * f[i];
    if (v > m) m = v;
  }
  return m;
}

double s_sum_exp_affine(const double* x, std::size_t n, double a, double shift) {
  return blocked_sum(n, [&](std::size_t i) { return std::exp(a * x[i] - shift); });
}

double s_sum_exp_affine2(const double* x, const double* f, std::size_t n,
                         double a, double b, double shift) {
  return blocked_sum(n, [&](std::size_t i) { return std::exp(a * x[i] + b * f[i] - shift); });
}

void s_add_inplace(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void s_normals_from_bits(const std::uint64_t* bits, std::size_t n, double* out) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t i = 0; i + 1 < n; i += 2) {
    // (word >> 12) + 0.5 scaled to (0,1): never 0, never 1.
    double u1 = (static_cast<double>(bits[i] >> 12) + 0.5) * 0x1.0p-52;
    double u2 = (static_cast<double>(bits[i + 1] >> 12) + 0.5) * 0x1.0p-52;
    double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(kTwoPi * u2);
    out[i + 1] = r * std::sin(kTwoPi * u2);
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k = {
      s_reduce_max,    s_reduce_max_affine2, s_sum_exp_affine,
      s_sum_exp_affine2, s_add_inplace,      s_normals_from_bits,
      "scalar",
  };
  return k;
}

}  // namespace gmclab::simd
