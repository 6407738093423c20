// AVX2 variants of the hot kernels. Same algorithms as the scalar lane;
// exp/log/sin/cos are evaluated by polynomials accurate to a few ulp, so the
// two lanes agree to ~1e-13 relative (checked by the equivalence tests).

#include "gmclab/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace gmclab::simd {
namespace {

constexpr std::size_t kBlock = 1024;

// ---- vector exp ---------------------------------------------------------
// Rational approximation on the ln2-reduced argument (Cephes exp.c form).
// Valid for x in [-708, 709]; callers keep arguments <= 0 via max-shifts.

inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d lo_clamp = _mm256_set1_pd(-708.0);
  const __m256d hi_clamp = _mm256_set1_pd(709.0);

  x = _mm256_min_pd(_mm256_max_pd(x, lo_clamp), hi_clamp);

  __m256d w = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(w, c1, x);
  x = _mm256_fnmadd_pd(w, c2, x);

  __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000005e0));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // scale by 2^w via the exponent field
  __m128i wi32 = _mm256_cvtpd_epi32(w);
  __m256i wi = _mm256_cvtepi32_epi64(wi32);
  __m256i bias = _mm256_add_epi64(wi, _mm256_set1_epi64x(1023));
  __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(bias, 52));
  return _mm256_mul_pd(e, scale);
}

// ---- vector log ----------------------------------------------------------
// x = m * 2^e with m in [1/sqrt2, sqrt2); log m = 2 atanh((m-1)/(m+1)) by an
// 11-term odd series. Inputs here are uniforms in (0,1).

inline __m256d log4(__m256d x) {
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);

  __m256i bits = _mm256_castpd_si256(x);
  __m256i expo = _mm256_srli_epi64(bits, 52);
  // m in [1, 2)
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));
  // fold m >= sqrt(2) down to [1/sqrt2, sqrt2)
  __m256d big = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GE_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), big);
  __m256i expo_adj = _mm256_sub_epi64(
      _mm256_and_si256(_mm256_castpd_si256(big), _mm256_set1_epi64x(1)),
      _mm256_set1_epi64x(1023));
  expo = _mm256_add_epi64(expo, expo_adj);

  // int64 -> double: offset into [0, 2^52) and use the 2^52 bias trick
  __m256i shifted = _mm256_add_epi64(expo, _mm256_set1_epi64x(1 << 20));
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(shifted, _mm256_set1_epi64x(0x4330000000000000LL))),
      _mm256_set1_pd(4503599627370496.0 + 1048576.0));

  __m256d s = _mm256_div_pd(_mm256_sub_pd(m, _mm256_set1_pd(1.0)),
                            _mm256_add_pd(m, _mm256_set1_pd(1.0)));
  __m256d z = _mm256_mul_pd(s, s);
  __m256d p = _mm256_set1_pd(1.0 / 21.0);
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0 / 3.0));
  p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(1.0));
  __m256d logm = _mm256_mul_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), s), p);

  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  __m256d r = _mm256_fmadd_pd(e, ln2_lo, logm);
  return _mm256_fmadd_pd(e, ln2_hi, r);
}

// ---- vector sin/cos of 2*pi*u for u in (0,1) -----------------------------

inline void sincos_2pi4(__m256d u, __m256d* sn, __m256d* cs) {
  // reduce u to x in [-0.5, 0.5], then to r = 2*pi*(x - q/4), |r| <= pi/4
  __m256d x = _mm256_sub_pd(
      u, _mm256_round_pd(u, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC));
  __m256d q = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(4.0)),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d v = _mm256_fnmadd_pd(q, _mm256_set1_pd(0.25), x);  // exact
  __m256d r = _mm256_mul_pd(v, _mm256_set1_pd(6.283185307179586476925286766559));
  __m256d r2 = _mm256_mul_pd(r, r);

  __m256d sp = _mm256_set1_pd(1.0 / 6227020800.0);  // 1/13!
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(-1.0 / 39916800.0));
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(1.0 / 362880.0));
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(-1.0 / 5040.0));
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(1.0 / 120.0));
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(-1.0 / 6.0));
  sp = _mm256_fmadd_pd(sp, r2, _mm256_set1_pd(1.0));
  __m256d s = _mm256_mul_pd(sp, r);

  __m256d cp = _mm256_set1_pd(-1.0 / 87178291200.0);  // -1/14!
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(1.0 / 479001600.0));
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(-1.0 / 3628800.0));
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(1.0 / 40320.0));
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(-1.0 / 720.0));
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(1.0 / 24.0));
  cp = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(-0.5));
  __m256d c = _mm256_fmadd_pd(cp, r2, _mm256_set1_pd(1.0));

  // quadrant fixup: qm = q mod 4; odd qm swaps, qm in {2,3} negates sin,
  // qm in {1,2} negates cos
  __m128i qi32 = _mm256_cvtpd_epi32(q);
  __m256i qi = _mm256_cvtepi32_epi64(qi32);
  __m256i qm = _mm256_and_si256(qi, _mm256_set1_epi64x(3));
  __m256i odd = _mm256_cmpeq_epi64(_mm256_and_si256(qm, _mm256_set1_epi64x(1)),
                                   _mm256_set1_epi64x(1));
  __m256d swap = _mm256_castsi256_pd(odd);
  __m256d s_sel = _mm256_blendv_pd(s, c, swap);
  __m256d c_sel = _mm256_blendv_pd(c, s, swap);
  __m256i sin_neg = _mm256_slli_epi64(_mm256_and_si256(qm, _mm256_set1_epi64x(2)), 62);
  __m256i cos_neg = _mm256_slli_epi64(
      _mm256_and_si256(_mm256_add_epi64(qm, _mm256_set1_epi64x(1)),
                       _mm256_set1_epi64x(2)),
      62);
  *sn = _mm256_xor_pd(s_sel, _mm256_castsi256_pd(sin_neg));
  *cs = _mm256_xor_pd(c_sel, _mm256_castsi256_pd(cos_neg));
}

// (word >> 12) + 0.5 scaled by 2^-52, matching the scalar lane exactly.
inline __m256d uniform_from_bits4(__m256i w) {
  __m256i k = _mm256_srli_epi64(w, 12);
  __m256d d = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(k, _mm256_set1_epi64x(0x4330000000000000LL))),
      _mm256_set1_pd(4503599627370496.0));
  return _mm256_mul_pd(_mm256_add_pd(d, _mm256_set1_pd(0.5)),
                       _mm256_set1_pd(0x1.0p-52));
}

// ---- kernels -------------------------------------------------------------

double v_reduce_max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vm);
    for (double v : lanes)
      if (v > m) m = v;
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double v_reduce_max_affine2(const double* x, const double* f, std::size_t n,
                            double a, double b) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b);
    __m256d vm = _mm256_fmadd_pd(vb, _mm256_loadu_pd(f),
                                 _mm256_mul_pd(va, _mm256_loadu_pd(x)));
    for (i = 4; i + 4 <= n; i += 4) {
      __m256d v = _mm256_fmadd_pd(vb, _mm256_loadu_pd(f + i),
                                  _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
      vm = _mm256_max_pd(vm, v);
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vm);
    for (double v : lanes)
      if (v > m) m = v;
  }
  for (; i < n; ++i) {
    double v = a * x[i] + b * f[i];
    if (v > m) m = v;
  }
  return m;
}

template <class BlockTerm, class ScalarTerm>
double blocked_sum_v(std::size_t n, BlockTerm block_term, ScalarTerm scalar_term) {
  double blocks[64];
  std::size_t nblocks = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t end = i + kBlock < n ? i + kBlock : n;
    __m256d vacc = _mm256_setzero_pd();
    for (; i + 4 <= end; i += 4) vacc = _mm256_add_pd(vacc, block_term(i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vacc);
    double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < end; ++i) acc += scalar_term(i);
    blocks[nblocks++] = acc;
    if (nblocks == 64) {
      for (std::size_t k = 0; k < 32; ++k) blocks[k] = blocks[2 * k] + blocks[2 * k + 1];
      nblocks = 32;
    }
  }
  for (std::size_t width = 1; width < nblocks; width *= 2)
    for (std::size_t k = 0; k + width < nblocks; k += 2 * width)
      blocks[k] += blocks[k + width];
  return nblocks ? blocks[0] : 0.0;
}

double v_sum_exp_affine(const double* x, std::size_t n, double a, double shift) {
  const __m256d va = _mm256_set1_pd(a), vs = _mm256_set1_pd(shift);
  return blocked_sum_v(
      n,
      [&](std::size_t i) {
        return exp4(_mm256_fmsub_pd(va, _mm256_loadu_pd(x + i), vs));
      },
      [&](std::size_t i) { return std::exp(a * x[i] - shift); });
}

double v_sum_exp_affine2(const double* x, const double* f, std::size_t n,
                         double a, double b, double shift) {
  const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b), vs = _mm256_set1_pd(shift);
  return blocked_sum_v(
      n,
      [&](std::size_t i) {
        __m256d e = _mm256_fmadd_pd(vb, _mm256_loadu_pd(f + i),
                                    _mm256_fmsub_pd(va, _mm256_loadu_pd(x + i), vs));
        return exp4(e);
      },
      [&](std::size_t i) { return std::exp(a * x[i] + b * f[i] - shift); });
}

void v_add_inplace(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] += src[i];
}

void v_normals_from_bits(const std::uint64_t* bits, std::size_t n, double* out) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256i a = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + i));
    __m256i b = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + i + 4));
    // deinterleave words: even -> u1, odd -> u2
    __m256i lo = _mm256_unpacklo_epi64(a, b);  // w0 w4 w2 w6
    __m256i hi = _mm256_unpackhi_epi64(a, b);  // w1 w5 w3 w7
    __m256i we = _mm256_permute4x64_epi64(lo, _MM_SHUFFLE(3, 1, 2, 0));
    __m256i wo = _mm256_permute4x64_epi64(hi, _MM_SHUFFLE(3, 1, 2, 0));
    __m256d u1 = uniform_from_bits4(we);
    __m256d u2 = uniform_from_bits4(wo);
    __m256d r = _mm256_sqrt_pd(_mm256_mul_pd(_mm256_set1_pd(-2.0), log4(u1)));
    __m256d s, c;
    sincos_2pi4(u2, &s, &c);
    __m256d rc = _mm256_mul_pd(r, c);
    __m256d rs = _mm256_mul_pd(r, s);
    __m256d olo = _mm256_unpacklo_pd(rc, rs);  // x0 y0 x2 y2
    __m256d ohi = _mm256_unpackhi_pd(rc, rs);  // x1 y1 x3 y3
    _mm256_storeu_pd(out + i, _mm256_permute2f128_pd(olo, ohi, 0x20));
    _mm256_storeu_pd(out + i + 4, _mm256_permute2f128_pd(olo, ohi, 0x31));
  }
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (; i + 1 < n; i += 2) {
    double u1 = (static_cast<double>(bits[i] >> 12) + 0.5) * 0x1.0p-52;
    double u2 = (static_cast<double>(bits[i + 1] >> 12) + 0.5) * 0x1.0p-52;
    double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(kTwoPi * u2);
    out[i + 1] = r * std::sin(kTwoPi * u2);
  }
}

}  // namespace

const Kernels* avx2_kernels() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) return nullptr;
  static const Kernels k = {
      v_reduce_max,      v_reduce_max_affine2, v_sum_exp_affine,
      v_sum_exp_affine2, v_add_inplace,        v_normals_from_bits,
      "avx2",
  };
  return &k;
}

}  // namespace gmclab::simd

#else

namespace gmclab::simd {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace gmclab::simd

#endif
