#pragma once

#include <cmath>
#include <functional>

namespace gcwm_test {

// Adaptive Simpson integration; plain recursive halving on the error
// estimate. Good enough for smooth 1-d densities.
inline double adaptive_simpson_(const std::function<double(double)>& f,
                                double a, double b, double fa, double fm,
                                double fb, double whole, double eps,
                                int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps)
    return left + right + delta / 15.0;
  return adaptive_simpson_(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         adaptive_simpson_(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double eps = 1e-10) {
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_(f, a, b, fa, fm, fb, whole, eps, 40);
}

}  // namespace gcwm_test
