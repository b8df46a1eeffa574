#include "gcwm/selection.hpp"

#include "gcwm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

namespace gcwm {

namespace {

// Series expansion of P(a, x), effective for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw convergence_error("incomplete gamma series failed to converge");
}

// Continued fraction for Q(a, x) by the modified Lentz algorithm,
// effective for x >= a + 1.
double gamma_q_cf(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw convergence_error(
      "incomplete gamma continued fraction failed to converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw input_error("regularized_gamma_p: a must be > 0");
  if (x < 0.0) throw input_error("regularized_gamma_p: x must be >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_cdf(double x, int df) {
  if (df < 1) throw input_error("chi2_cdf: degrees of freedom must be >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(0.5 * df, 0.5 * x);
}

double chi2_quantile(double p, int df) {
  if (df < 1)
    throw input_error("chi2_quantile: degrees of freedom must be >= 1");
  if (!(p >= 0.0 && p < 1.0))
    throw input_error("chi2_quantile: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (chi2_cdf(hi, df) < p) {
    hi *= 2.0;
    if (hi > 1e12) throw convergence_error("chi2_quantile: bracket failed");
  }
  while (hi - lo > 1e-10) {
    double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

InfoCriteria info_criteria(const GcwmModel& model, std::size_t n) {
  InfoCriteria ic;
  ic.loglik = model.loglik;
  ic.n_params = model.n_params;
  ic.n = n;
  ic.aic = -2.0 * model.loglik + 2.0 * model.n_params;
  ic.bic = -2.0 * model.loglik +
           static_cast<double>(model.n_params) * std::log(static_cast<double>(n));
  return ic;
}

LrTestResult zero_inflation_lr_test(double poisson_loglik, double zip_loglik,
                                    int m) {
  if (m < 1) throw input_error("lr test: zero-model width must be >= 1");
  double phi = -2.0 * (poisson_loglik - zip_loglik);
  if (phi < -1e-6)
    throw input_error(
        "lr test: zero-inflated log-likelihood is below the nested Poisson "
        "fit");
  if (phi <= 0.0) phi = 0.0;  // also normalizes -0.0
  LrTestResult r;
  r.phi = phi;
  r.m = m;
  // 95th percentile of the boundary mixture 0.5 chi2_0 + 0.5 chi2_m equals
  // the 90th percentile of chi2_m.
  r.critical_95 = chi2_quantile(0.90, m);
  r.reject = phi > r.critical_95;
  return r;
}

std::vector<int> max_trace_permutation(const Eigen::MatrixXd& overlap) {
  const int K = static_cast<int>(overlap.rows());
  if (overlap.cols() != K)
    throw input_error("max_trace_permutation expects a square matrix");
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  if (K <= 1) return perm;

  if (K <= 8) {
    std::vector<int> cur = perm, best = perm;
    double best_sum = -std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (int r = 0; r < K; ++r) s += overlap(r, cur[static_cast<std::size_t>(r)]);
      if (s > best_sum) {
        best_sum = s;
        best = cur;
      }
    } while (std::next_permutation(cur.begin(), cur.end()));
    return best;
  }

  // Greedy fallback for large K: repeatedly take the best remaining cell.
  std::vector<bool> row_used(static_cast<std::size_t>(K), false);
  std::vector<bool> col_used(static_cast<std::size_t>(K), false);
  for (int picked = 0; picked < K; ++picked) {
    int br = -1, bc = -1;
    double bv = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < K; ++r) {
      if (row_used[static_cast<std::size_t>(r)]) continue;
      for (int c = 0; c < K; ++c) {
        if (col_used[static_cast<std::size_t>(c)]) continue;
        if (overlap(r, c) > bv) {
          bv = overlap(r, c);
          br = r;
          bc = c;
        }
      }
    }
    perm[static_cast<std::size_t>(br)] = bc;
    row_used[static_cast<std::size_t>(br)] = true;
    col_used[static_cast<std::size_t>(bc)] = true;
  }
  return perm;
}

ConfusionReport confusion_report(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels) {
  if (true_labels.size() != predicted_labels.size())
    throw input_error("confusion_report: label vectors differ in length");
  if (true_labels.empty())
    throw input_error("confusion_report: empty label vectors");
  const std::size_t n = true_labels.size();

  std::map<int, int> tmap, pmap;
  for (int t : true_labels) tmap.emplace(t, 0);
  for (int p : predicted_labels) pmap.emplace(p, 0);
  {
    int next = 0;
    for (auto& kv : tmap) kv.second = next++;
    next = 0;
    for (auto& kv : pmap) kv.second = next++;
  }
  const int kt = static_cast<int>(tmap.size());
  const int kp = static_cast<int>(pmap.size());
  const int K = std::max(kt, kp);  // pad with empty classes

  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < n; ++i)
    M(tmap[true_labels[i]], pmap[predicted_labels[i]]) += 1.0;

  std::vector<int> perm = max_trace_permutation(M);
  Eigen::MatrixXi aligned(K, K);
  for (int r = 0; r < K; ++r)
    for (int c = 0; c < K; ++c)
      aligned(r, c) = static_cast<int>(M(r, perm[static_cast<std::size_t>(c)]));

  ConfusionReport rep;
  rep.matrix = aligned;
  double trace = 0.0;
  for (int r = 0; r < K; ++r) trace += aligned(r, r);
  rep.misclassification = 1.0 - trace / static_cast<double>(n);

  double purity_sum = 0.0;
  int purity_rows = 0;
  for (int r = 0; r < K; ++r) {
    double rowsum = 0.0;
    for (int c = 0; c < K; ++c) rowsum += aligned(r, c);
    if (rowsum > 0.0) {
      purity_sum += aligned(r, r) / rowsum;
      ++purity_rows;
    }
  }
  rep.purity = purity_rows > 0 ? purity_sum / purity_rows : 0.0;

  // Adjusted Rand index via the contingency pair-count form (alignment has
  // no effect on it).
  auto choose2 = [](double v) { return v * (v - 1.0) / 2.0; };
  double index = 0.0, asum = 0.0, bsum = 0.0;
  for (int r = 0; r < K; ++r) {
    double rowsum = 0.0;
    for (int c = 0; c < K; ++c) {
      index += choose2(M(r, c));
      rowsum += M(r, c);
    }
    asum += choose2(rowsum);
  }
  for (int c = 0; c < K; ++c) bsum += choose2(M.col(c).sum());
  double total = choose2(static_cast<double>(n));
  double expected = total > 0.0 ? asum * bsum / total : 0.0;
  double maximum = 0.5 * (asum + bsum);
  rep.ari = maximum - expected > 0.0
                ? (index - expected) / (maximum - expected)
                : 1.0;  // both partitions trivial
  return rep;
}

std::pair<GcwmModel, SelectionTable> select_k(
    const Dataset& data, const std::vector<int>& k_range, ResponseKind kind,
    const Selections& selections, const FitOptions& options) {
  if (k_range.empty()) throw input_error("select_k: empty component range");
  for (int k : k_range)
    if (k < 1) throw input_error("select_k: component counts must be >= 1");

  SelectionTable table;
  std::optional<GcwmModel> best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k : k_range) {
    SelectionRow row;
    row.K = k;
    try {
      GcwmModel m = fit_gcwm(data, k, kind, selections, options);
      row.criteria = info_criteria(m, data.n());
      if (row.criteria->bic < best_bic) {
        best_bic = row.criteria->bic;
        table.best_K = k;
        best = std::move(m);
      }
    } catch (const component_collapse& e) {
      row.failure = e.what();
    } catch (const convergence_error& e) {
      row.failure = e.what();
    } catch (const sizing_error& e) {
      row.failure = e.what();
    }
    table.rows.push_back(std::move(row));
  }
  if (!best)
    throw convergence_error(
        "no candidate component count produced a usable fit");
  return {std::move(*best), std::move(table)};
}

}  // namespace gcwm
