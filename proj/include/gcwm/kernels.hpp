#pragma once

#include <cstddef>
#include <string>

namespace gcwm::kernels {

// Data-parallel primitives behind the density, E-step and IRLS inner loops.
// One scalar reference implementation always exists; on x86-64 an AVX2+FMA
// variant is selected at runtime when the CPU supports it.
//
// exp/log contract: results match libm to a few ulp for |x| <= 708 (exp) and
// normal positive finite x (log); beyond that exp saturates monotonically to
// 0 / +inf and log falls back to the libm path lane by lane.
struct Ops {
  const char* name;

  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // sum_i w[i]*x[i]*y[i]
  double (*weighted_dot)(const double* w, const double* x, const double* y,
                         std::size_t n);

  void (*exp_inplace)(double* x, std::size_t n);
  void (*log_inplace)(double* x, std::size_t n);

  void (*max_inplace)(double* dst, const double* src, std::size_t n);
  void (*add_inplace)(double* dst, const double* src, std::size_t n);
  void (*sub_inplace)(double* dst, const double* src, std::size_t n);
  void (*mul_inplace)(double* dst, const double* src, std::size_t n);
  // dst[i] += src[i]*src[i]
  void (*square_add_inplace)(double* dst, const double* src, std::size_t n);
  // y[i] += a*x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  void (*add_scalar_inplace)(double* dst, double a, std::size_t n);
  void (*scale_inplace)(double* dst, double a, std::size_t n);
};

// Reference implementation (plain loops, libm exp/log).
const Ops& scalar();

// AVX2+FMA implementation, or nullptr when the build or CPU lacks it.
const Ops* avx2();

// The implementation in use. Picks AVX2 when available; the environment
// variable GCWM_KERNELS=scalar|avx2 overrides.
const Ops& active();

// Force a specific implementation by name (tests). Throws on unknown name
// or when the requested variant is unavailable.
void force(const std::string& name);

inline double sum(const double* x, std::size_t n) { return active().sum(x, n); }
inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline double weighted_dot(const double* w, const double* x, const double* y,
                           std::size_t n) {
  return active().weighted_dot(w, x, y, n);
}
inline void exp_inplace(double* x, std::size_t n) { active().exp_inplace(x, n); }
inline void log_inplace(double* x, std::size_t n) { active().log_inplace(x, n); }
inline void max_inplace(double* dst, const double* src, std::size_t n) {
  active().max_inplace(dst, src, n);
}
inline void add_inplace(double* dst, const double* src, std::size_t n) {
  active().add_inplace(dst, src, n);
}
inline void sub_inplace(double* dst, const double* src, std::size_t n) {
  active().sub_inplace(dst, src, n);
}
inline void mul_inplace(double* dst, const double* src, std::size_t n) {
  active().mul_inplace(dst, src, n);
}
inline void square_add_inplace(double* dst, const double* src, std::size_t n) {
  active().square_add_inplace(dst, src, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active().axpy(a, x, y, n);
}
inline void add_scalar_inplace(double* dst, double a, std::size_t n) {
  active().add_scalar_inplace(dst, a, n);
}
inline void scale_inplace(double* dst, double a, std::size_t n) {
  active().scale_inplace(dst, a, n);
}

}  // namespace gcwm::kernels
