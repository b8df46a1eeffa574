#include "gcwm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace gcwm::kernels {

namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double weighted_dot_scalar(const double* w, const double* x, const double* y,
                           std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i] * y[i];
  return s;
}

void exp_inplace_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

void log_inplace_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = std::log(x[i]);
}

void max_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(dst[i], src[i]);
}

void add_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void sub_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] -= src[i];
}

void mul_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= src[i];
}

void square_add_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i] * src[i];
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_scalar_inplace_scalar(double* dst, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a;
}

void scale_inplace_scalar(double* dst, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= a;
}

const Ops kScalarOps = {
    "scalar",
    sum_scalar,
    dot_scalar,
    weighted_dot_scalar,
    exp_inplace_scalar,
    log_inplace_scalar,
    max_inplace_scalar,
    add_inplace_scalar,
    sub_inplace_scalar,
    mul_inplace_scalar,
    square_add_inplace_scalar,
    axpy_scalar,
    add_scalar_inplace_scalar,
    scale_inplace_scalar,
};

const Ops* pick_default() {
  if (const char* env = std::getenv("GCWM_KERNELS")) {
    std::string want(env);
    if (want == "scalar") return &kScalarOps;
    if (want == "avx2" && avx2() != nullptr) return avx2();
    // Unknown or unavailable request: fall through to auto selection.
  }
  if (const Ops* v = avx2()) return v;
  return &kScalarOps;
}

const Ops*& active_slot() {
  static const Ops* slot = pick_default();
  return slot;
}

}  // namespace

const Ops& scalar() { return kScalarOps; }

const Ops& active() { return *active_slot(); }

void force(const std::string& name) {
  if (name == "scalar") {
    active_slot() = &kScalarOps;
    return;
  }
  if (name == "avx2") {
    if (const Ops* v = avx2()) {
      active_slot() = v;
      return;
    }
    throw std::runtime_error("kernels: avx2 variant not available on this CPU");
  }
  throw std::runtime_error("kernels: unknown variant '" + name + "'");
}

}  // namespace gcwm::kernels
