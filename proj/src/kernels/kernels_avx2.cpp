// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers reach it only through the runtime dispatch in
// kernels.cpp, so no AVX2 instruction executes on CPUs without support.

#include "gcwm/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

namespace gcwm::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double weighted_dot_avx2(const double* w, const double* x, const double* y,
                         std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    acc = _mm256_fmadd_pd(wx, _mm256_loadu_pd(y + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * x[i] * y[i];
  return s;
}

// ---- exp/log polynomial kernels (Cephes-derived rational approximations) --

inline __m256d exp4(__m256d x) {
  const __m256d kLog2E = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d kC1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d kC2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d kP0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d kP1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d kP2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d kQ0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d kQ1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d kQ2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d kQ3 = _mm256_set1_pd(2.00000000000000000005e0);
  const __m256d kHi = _mm256_set1_pd(709.782712893383996843);
  const __m256d kLo = _mm256_set1_pd(-708.396418532264078749);

  __m256d over = _mm256_cmp_pd(x, kHi, _CMP_GT_OQ);
  __m256d under = _mm256_cmp_pd(x, kLo, _CMP_LT_OQ);
  __m256d xc = _mm256_min_pd(_mm256_max_pd(x, kLo), kHi);

  __m256d nf = _mm256_round_pd(_mm256_mul_pd(xc, kLog2E),
                               _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nf, kC1, xc);
  r = _mm256_fnmadd_pd(nf, kC2, r);
  __m256d rr = _mm256_mul_pd(r, r);

  __m256d p = _mm256_fmadd_pd(kP0, rr, kP1);
  p = _mm256_fmadd_pd(p, rr, kP2);
  __m256d px = _mm256_mul_pd(r, p);
  __m256d q = _mm256_fmadd_pd(kQ0, rr, kQ1);
  q = _mm256_fmadd_pd(q, rr, kQ2);
  q = _mm256_fmadd_pd(q, rr, kQ3);
  __m256d frac = _mm256_div_pd(px, _mm256_sub_pd(q, px));
  __m256d res = _mm256_fmadd_pd(_mm256_set1_pd(2.0), frac, _mm256_set1_pd(1.0));

  // scale by 2^n via two halves: n = n1 + n2 with n1 = n>>1
  alignas(32) double nbuf[4];
  _mm256_store_pd(nbuf, nf);
  alignas(32) std::int64_t n1[4], n2[4];
  for (int lane = 0; lane < 4; ++lane) {
    std::int64_t nn = static_cast<std::int64_t>(nbuf[lane]);
    n1[lane] = nn >> 1;
    n2[lane] = nn - n1[lane];
  }
  auto pow2 = [](const std::int64_t* k) {
    alignas(32) std::int64_t bits[4];
    for (int lane = 0; lane < 4; ++lane) bits[lane] = (k[lane] + 1023) << 52;
    return _mm256_castsi256_pd(
        _mm256_load_si256(reinterpret_cast<const __m256i*>(bits)));
  };
  res = _mm256_mul_pd(_mm256_mul_pd(res, pow2(n1)), pow2(n2));

  res = _mm256_blendv_pd(res, _mm256_set1_pd(HUGE_VAL), over);
  res = _mm256_blendv_pd(res, _mm256_setzero_pd(), under);
  return res;
}

// log(x) = 2*atanh(s) + e*ln2 with x = m*2^e, m in [sqrt(.5), sqrt(2)),
// s = (m-1)/(m+1).  atanh(s) = s + s*z*T(z), z = s^2, T the odd-series tail
// 1/3 + z/5 + ... + z^9/21; |s| <= 0.1716 keeps the truncation below 1e-18.
// ln2 is split so that e*ln2hi is exact and the residual enters with the
// small terms; total error stays within a couple of ulp, including near x=1
// where (m-1) is computed exactly.
inline __m256d log4(__m256d x) {
  const __m256d kSqrtHalf = _mm256_set1_pd(0.70710678118654752440);
  const __m256d kLn2Hi = _mm256_set1_pd(0.693359375);  // 355/512, exact
  const __m256d kLn2Lo = _mm256_set1_pd(-2.121944400546905827679e-4);
  const __m256d kOne = _mm256_set1_pd(1.0);

  __m256i bits = _mm256_castpd_si256(x);
  // exponent field, unbiased so that mantissa lands in [0.5, 1)
  __m256i expfield = _mm256_srli_epi64(bits, 52);
  expfield = _mm256_and_si256(expfield, _mm256_set1_epi64x(0x7FF));
  __m256i ei = _mm256_sub_epi64(expfield, _mm256_set1_epi64x(1022));
  __m256i mant = _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL));
  mant = _mm256_or_si256(mant, _mm256_set1_epi64x(0x3FE0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mant);

  // double e (convert via scalar lanes; epi64->pd needs AVX512)
  alignas(32) std::int64_t ebuf[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(ebuf), ei);
  __m256d e = _mm256_set_pd(static_cast<double>(ebuf[3]),
                            static_cast<double>(ebuf[2]),
                            static_cast<double>(ebuf[1]),
                            static_cast<double>(ebuf[0]));

  __m256d below = _mm256_cmp_pd(m, kSqrtHalf, _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(below, kOne));
  m = _mm256_blendv_pd(m, _mm256_add_pd(m, m), below);

  __m256d s = _mm256_div_pd(_mm256_sub_pd(m, kOne), _mm256_add_pd(m, kOne));
  __m256d u = _mm256_add_pd(s, s);
  __m256d z = _mm256_mul_pd(s, s);

  __m256d t = _mm256_set1_pd(1.0 / 21.0);
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 19.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 17.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 15.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 13.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 11.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 9.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 7.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 5.0));
  t = _mm256_fmadd_pd(t, z, _mm256_set1_pd(1.0 / 3.0));

  __m256d y = _mm256_mul_pd(_mm256_mul_pd(u, z), t);
  y = _mm256_fmadd_pd(e, kLn2Lo, y);
  __m256d res = _mm256_add_pd(u, y);
  res = _mm256_fmadd_pd(e, kLn2Hi, res);
  return res;
}

// True when every lane is a normal positive finite double.
inline bool all_log_safe(__m256d x) {
  const __m256d tiny = _mm256_set1_pd(2.2250738585072014e-308);
  const __m256d huge = _mm256_set1_pd(1.7976931348623157e308);
  __m256d ok = _mm256_and_pd(_mm256_cmp_pd(x, tiny, _CMP_GE_OQ),
                             _mm256_cmp_pd(x, huge, _CMP_LE_OQ));
  return _mm256_movemask_pd(ok) == 0xF;
}

void exp_inplace_avx2(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, exp4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] = std::exp(x[i]);
}

void log_inplace_avx2(double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    if (all_log_safe(v)) {
      _mm256_storeu_pd(x + i, log4(v));
    } else {
      for (int lane = 0; lane < 4; ++lane) x[i + lane] = std::log(x[i + lane]);
    }
  }
  for (; i < n; ++i) x[i] = std::log(x[i]);
}

void max_inplace_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_max_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] = dst[i] > src[i] ? dst[i] : src[i];
}

void add_inplace_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] += src[i];
}

void sub_inplace_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] -= src[i];
}

void mul_inplace_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(dst + i),
                                            _mm256_loadu_pd(src + i)));
  for (; i < n; ++i) dst[i] *= src[i];
}

void square_add_inplace_avx2(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d s = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_fmadd_pd(s, s, _mm256_loadu_pd(dst + i)));
  }
  for (; i < n; ++i) dst[i] += src[i] * src[i];
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(
        y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void add_scalar_inplace_avx2(double* dst, double a, std::size_t n) {
  __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), av));
  for (; i < n; ++i) dst[i] += a;
}

void scale_inplace_avx2(double* dst, double a, std::size_t n) {
  __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(dst + i), av));
  for (; i < n; ++i) dst[i] *= a;
}

const Ops kAvx2Ops = {
    "avx2",
    sum_avx2,
    dot_avx2,
    weighted_dot_avx2,
    exp_inplace_avx2,
    log_inplace_avx2,
    max_inplace_avx2,
    add_inplace_avx2,
    sub_inplace_avx2,
    mul_inplace_avx2,
    square_add_inplace_avx2,
    axpy_avx2,
    add_scalar_inplace_avx2,
    scale_inplace_avx2,
};

}  // namespace

const Ops* avx2() {
#if defined(__x86_64__) || defined(__i386__)
  static const bool supported = __builtin_cpu_supports("avx2") &&
                                __builtin_cpu_supports("fma");
  return supported ? &kAvx2Ops : nullptr;
#else
  return nullptr;
#endif
}

}  // namespace gcwm::kernels

#else  // no AVX2 at compile time for this TU

namespace gcwm::kernels {
const Ops* avx2() { return nullptr; }
}  // namespace gcwm::kernels

#endif
