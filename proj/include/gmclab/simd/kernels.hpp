#pragma once

#include <cstddef>
#include <cstdint>

namespace gmclab::simd {

/// Hot inner loops of the library. Every entry has a scalar reference
/// implementation and, on x86-64, an AVX2 variant; the two are
/// equivalence-tested against each other. Selection happens once per process
/// (see active()), so a given run is bit-reproducible.
struct Kernels {
  /// max over x[0..n). n == 0 -> -inf.
  double (*reduce_max)(const double* x, std::size_t n);

  /// max over a*x[i] + b*f[i].
  double (*reduce_max_affine2)(const double* x, const double* f, std::size_t n,
                               double a, double b);

  /// sum of exp(a*x[i] - shift).
  double (*sum_exp_affine)(const double* x, std::size_t n, double a, double shift);

  /// sum of exp(a*x[i] + b*f[i] - shift).
  double (*sum_exp_affine2)(const double* x, const double* f, std::size_t n,
                            double a, double b, double shift);

  /// dst[i] += src[i].
  void (*add_inplace)(double* dst, const double* src, std::size_t n);

  /// Box-Muller: words (2i, 2i+1) -> normals (2i, 2i+1). n must be even.
  void (*normals_from_bits)(const std::uint64_t* bits, std::size_t n, double* out);

  const char* name;
};

/// Kernels selected at startup: AVX2 when the CPU supports it, else scalar.
/// Environment variable GMCLAB_SIMD=scalar|avx2 forces a lane.
const Kernels& active();

const Kernels& scalar_kernels();

/// nullptr when unsupported (non-x86 build or CPU without AVX2).
const Kernels* avx2_kernels();

}  // namespace gmclab::simd
