#pragma once

#include "gcwm/em.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace gcwm {

struct InfoCriteria {
  double loglik = 0.0;
  int n_params = 0;
  std::size_t n = 0;
  double aic = 0.0;  // -2 loglik + 2 n_params
  double bic = 0.0;  // -2 loglik + n_params * ln(n)
};

struct LrTestResult {
  double phi = 0.0;     // -2 [loglik(Poisson) - loglik(ZIP)], clamped at 0
  int m = 0;            // zero-model design width, intercept included
  double critical_95 = 0.0;  // 95th pct of 0.5 chi2_0 + 0.5 chi2_m
  bool reject = false;
};

struct ConfusionReport {
  Eigen::MatrixXi matrix;  // true x predicted counts after alignment
  double misclassification = 0.0;  // 1 - trace / n
  double purity = 0.0;  // mean of per-true-class diagonal proportions
  double ari = 0.0;
};

// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);

// chi-square CDF and quantile (inverse via bisection to 1e-10).
double chi2_cdf(double x, int df);
double chi2_quantile(double p, int df);

InfoCriteria info_criteria(const GcwmModel& model, std::size_t n);

// phi = -2 [poisson_loglik - zip_loglik]. Values below -1e-6 signal a
// broken nesting and throw; small negatives are clamped to 0. The critical
// value is the chi2_m quantile at 0.90 (the 95th percentile of the
// boundary mixture 0.5 chi2_0 + 0.5 chi2_m).
LrTestResult zero_inflation_lr_test(double poisson_loglik, double zip_loglik,
                                    int m);

// Permutation assigning each row of `overlap` a distinct column so the
// assigned sum is maximal. Exhaustive for up to 8 rows, greedy beyond.
std::vector<int> max_trace_permutation(const Eigen::MatrixXd& overlap);

// Confusion matrix between label vectors after max-trace alignment of
// predicted onto true labels, plus misclassification, average purity, and
// the adjusted Rand index. Extra predicted classes pad with empty rows.
ConfusionReport confusion_report(const std::vector<int>& true_labels,
                                 const std::vector<int>& predicted_labels);

struct SelectionRow {
  int K = 0;
  std::optional<InfoCriteria> criteria;  // empty when the fit failed
  std::string failure;                   // failure note when empty
};

struct SelectionTable {
  std::vector<SelectionRow> rows;
  int best_K = 0;  // argmin BIC over successful rows
};

// Fits each K in k_range, returns the argmin-BIC model plus the table.
// Per-K failures become table annotations; throws only when every K fails.
std::pair<GcwmModel, SelectionTable> select_k(
    const Dataset& data, const std::vector<int>& k_range, ResponseKind kind,
    const Selections& selections, const FitOptions& options);

}  // namespace gcwm
