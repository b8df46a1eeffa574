#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gcwm/em.hpp"
#include "gcwm/errors.hpp"
#include "gcwm/rng.hpp"
#include "gcwm/selection.hpp"

#include <cmath>
#include <numeric>
#include <vector>

using namespace gcwm;

TEST_CASE("regularized incomplete gamma against closed forms") {
  // a = 1: P(1, x) = 1 - exp(-x).
  for (double x : {0.1, 0.5, 1.0, 3.0, 10.0})
    CHECK(regularized_gamma_p(1.0, x) ==
          doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-12));
  // a = 2: P(2, x) = 1 - (1 + x) exp(-x).
  for (double x : {0.2, 1.0, 4.0, 12.0})
    CHECK(regularized_gamma_p(2.0, x) ==
          doctest::Approx(1.0 - (1.0 + x) * std::exp(-x)).epsilon(1e-12));
  CHECK(regularized_gamma_p(3.5, 0.0) == 0.0);
  CHECK_THROWS_AS(regularized_gamma_p(-1.0, 1.0), input_error);
  CHECK_THROWS_AS(regularized_gamma_p(1.0, -0.5), input_error);
}

TEST_CASE("chi-square CDF matches the exponential special case") {
  // df = 2 is Exp(1/2): CDF = 1 - exp(-x/2).
  for (double x : {0.5, 1.0, 4.605, 9.0})
    CHECK(chi2_cdf(x, 2) ==
          doctest::Approx(1.0 - std::exp(-x / 2.0)).epsilon(1e-12));
}

TEST_CASE("quantile inverts the CDF") {
  for (int df : {1, 2, 3, 6, 10}) {
    for (double p : {0.05, 0.5, 0.9, 0.99}) {
      double q = chi2_quantile(p, df);
      CHECK(chi2_cdf(q, df) == doctest::Approx(p).epsilon(1e-9));
    }
  }
  CHECK(chi2_quantile(0.0, 4) == 0.0);
  CHECK_THROWS_AS(chi2_quantile(1.0, 4), input_error);
}

TEST_CASE("boundary-mixture critical values hit the tabulated anchors") {
  // 95th percentile of 0.5 chi2_0 + 0.5 chi2_m = chi2_m quantile at 0.90.
  LrTestResult t2 = zero_inflation_lr_test(-100.0, -99.0, 2);
  CHECK(t2.critical_95 == doctest::Approx(4.605).epsilon(0.001 / 4.605));
  LrTestResult t6 = zero_inflation_lr_test(-100.0, -99.0, 6);
  CHECK(t6.critical_95 == doctest::Approx(10.645).epsilon(0.001 / 10.645));
  CHECK(std::abs(t2.critical_95 - 4.605) < 1e-3);
  CHECK(std::abs(t6.critical_95 - 10.645) < 1e-3);
}

TEST_CASE("critical value grows with the zero-model width") {
  double prev = 0.0;
  for (int m = 1; m <= 8; ++m) {
    double c = zero_inflation_lr_test(-10.0, -10.0, m).critical_95;
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("likelihood-ratio statistic arithmetic and clamping") {
  LrTestResult r = zero_inflation_lr_test(-120.0, -110.0, 2);
  CHECK(r.phi == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(r.reject);

  LrTestResult eq = zero_inflation_lr_test(-50.0, -50.0, 2);
  CHECK(eq.phi == 0.0);
  CHECK_FALSE(eq.reject);

  // Tiny numerical undershoot clamps to zero.
  LrTestResult clamp = zero_inflation_lr_test(-50.0, -50.0 - 1e-8, 2);
  CHECK(clamp.phi == 0.0);
  CHECK_FALSE(clamp.reject);

  // A real violation of the nesting is an error, not a silent clamp.
  CHECK_THROWS_AS(zero_inflation_lr_test(-50.0, -51.0, 2), input_error);
  CHECK_THROWS_AS(zero_inflation_lr_test(-50.0, -49.0, 0), input_error);
}

TEST_CASE("information criteria arithmetic") {
  GcwmModel m;
  m.loglik = -100.0;
  m.n_params = 5;
  InfoCriteria ic = info_criteria(m, 100);
  CHECK(ic.aic == doctest::Approx(210.0).epsilon(1e-12));
  CHECK(ic.bic == doctest::Approx(200.0 + 5.0 * std::log(100.0)).epsilon(1e-12));

  GcwmModel m2 = m;
  m2.n_params = 6;
  InfoCriteria ic2 = info_criteria(m2, 100);
  CHECK(ic2.bic - ic.bic == doctest::Approx(std::log(100.0)).epsilon(1e-12));
  CHECK(ic2.aic - ic.aic == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("max-trace permutation beats the identity on a swapped overlap") {
  Eigen::MatrixXd o(3, 3);
  o << 1, 90, 2, 80, 3, 1, 2, 4, 70;
  std::vector<int> perm = max_trace_permutation(o);
  CHECK(perm == std::vector<int>{1, 0, 2});

  // Identity when the diagonal already dominates.
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(4, 4) * 10.0;
  CHECK(max_trace_permutation(d) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("greedy fallback still returns a valid permutation beyond 8 classes") {
  rng::Rng r(9);
  Eigen::MatrixXd o(10, 10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) o(i, j) = r.uniform();
  std::vector<int> perm = max_trace_permutation(o);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> want(10);
  std::iota(want.begin(), want.end(), 0);
  CHECK(sorted == want);
}

TEST_CASE("confusion anchors on the documented three-class table") {
  // True-class counts 1000/1000/1000 with the off-diagonal errors fixed.
  std::vector<int> truth, pred;
  auto add = [&](int t, int p, int c) {
    for (int i = 0; i < c; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(0, 0, 992); add(0, 1, 3); add(0, 2, 5);
  add(1, 1, 990); add(1, 2, 10);
  add(2, 0, 15); add(2, 1, 20); add(2, 2, 965);
  ConfusionReport r = confusion_report(truth, pred);
  CHECK(r.matrix(0, 0) == 992);
  CHECK(r.matrix(2, 1) == 20);
  // Exact: 1 - 2947/3000; prints as 1.77% at two decimals.
  CHECK(r.misclassification == doctest::Approx(53.0 / 3000.0).epsilon(1e-12));
  CHECK(std::round(r.misclassification * 10000.0) / 100.0 == 1.77);
  // Mean of per-class diagonal proportions: (0.992 + 0.990 + 0.965) / 3;
  // prints as 98.23% at two decimals.
  CHECK(r.purity == doctest::Approx(2947.0 / 3000.0).epsilon(1e-12));
  CHECK(std::round(r.purity * 10000.0) / 100.0 == 98.23);
  CHECK(r.ari > 0.9);
}

TEST_CASE("perfect and permuted-perfect partitions score perfectly") {
  std::vector<int> truth{0, 0, 1, 1, 2, 2};
  ConfusionReport same = confusion_report(truth, truth);
  CHECK(same.misclassification == 0.0);
  CHECK(same.purity == 1.0);
  CHECK(same.ari == doctest::Approx(1.0));

  std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
  ConfusionReport perm = confusion_report(truth, relabeled);
  CHECK(perm.misclassification == 0.0);
  CHECK(perm.purity == 1.0);
  CHECK(perm.ari == doctest::Approx(1.0));
}

TEST_CASE("single-class against anything gives ARI 1 for equal partitions only") {
  std::vector<int> ones{0, 0, 0, 0};
  ConfusionReport r = confusion_report(ones, ones);
  CHECK(r.ari == doctest::Approx(1.0));
  CHECK(r.misclassification == 0.0);
}

namespace {

// Independent ARI oracle: direct pair counting over all n(n-1)/2 pairs.
double ari_pairs(const std::vector<int>& a, const std::vector<int>& b) {
  const int n = static_cast<int>(a.size());
  double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      bool sa = a[i] == a[j], sb = b[i] == b[j];
      if (sa && sb) ++n11;
      else if (!sa && !sb) ++n00;
      else if (sa) ++n10;
      else ++n01;
    }
  double total = n11 + n00 + n10 + n01;
  double expected = (n11 + n10) * (n11 + n01) / total;
  double maximum = 0.5 * ((n11 + n10) + (n11 + n01));
  if (maximum - expected <= 0.0) return 1.0;
  return (n11 - expected) / (maximum - expected);
}

void all_partitions(int n, int maxc, std::vector<std::vector<int>>& out) {
  std::vector<int> cur(n, 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int c = 0; c <= std::min(used, maxc - 1); ++c) {
      cur[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
}

}  // namespace

TEST_CASE("ARI equals brute-force pair counting on every small partition pair") {
  for (int n : {4, 6, 8}) {
    std::vector<std::vector<int>> parts;
    all_partitions(n, 3, parts);
    // Stride the cross product to keep the case fast while still covering
    // hundreds of distinct pairs, including the trivial ones.
    std::size_t step = n == 8 ? 37 : 7;
    for (std::size_t a = 0; a < parts.size(); a += 3) {
      for (std::size_t b = a % step; b < parts.size(); b += step) {
        ConfusionReport r = confusion_report(parts[a], parts[b]);
        double want = ari_pairs(parts[a], parts[b]);
        CHECK(r.ari == doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("alignment never lowers the diagonal below the unaligned trace") {
  rng::Rng r(31);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> t(40), p(40);
    for (int i = 0; i < 40; ++i) {
      t[i] = static_cast<int>(r.raw() % 3);
      p[i] = static_cast<int>(r.raw() % 4);
    }
    ConfusionReport rep_r = confusion_report(t, p);
    // Rebuild the unaligned contingency table directly.
    Eigen::MatrixXi raw = Eigen::MatrixXi::Zero(4, 4);
    for (int i = 0; i < 40; ++i) ++raw(t[i], p[i]);
    CHECK(rep_r.matrix.trace() >= raw.trace());
    CHECK(rep_r.matrix.sum() == 40);
  }
}

TEST_CASE("label values need not be contiguous") {
  std::vector<int> t{5, 5, 9, 9, 9};
  std::vector<int> p{100, 100, 7, 7, 7};
  ConfusionReport r = confusion_report(t, p);
  CHECK(r.misclassification == 0.0);
  CHECK(r.ari == doctest::Approx(1.0));
}

TEST_CASE("confusion report rejects malformed input") {
  CHECK_THROWS_AS(confusion_report({0, 1}, {0}), input_error);
  CHECK_THROWS_AS(confusion_report({}, {}), input_error);
}

// ---------------------------------------------------------------------------
// K selection.

namespace {

Dataset selection_sample(std::uint64_t seed, int n_per) {
  rng::Rng r(seed);
  const int n = 2 * n_per;
  Eigen::VectorXd y(n);
  Eigen::MatrixXd g(n, 1);
  for (int i = 0; i < n; ++i) {
    int k = i < n_per ? 0 : 1;
    g(i, 0) = r.normal(k == 0 ? -2.5 : 2.5, 0.6);
    y(i) = r.poisson(std::exp(k == 0 ? 0.3 : 1.8));
  }
  return Dataset(y, Eigen::VectorXd(), Eigen::VectorXd(), g,
                 {{"x", Role::gaussian, {}}}, Eigen::MatrixXd(n, 0), {}, {},
                 {});
}

}  // namespace

TEST_CASE("BIC selection picks the true component count") {
  Dataset d = selection_sample(81, 150);
  Selections sel;
  sel.response = {"x"};
  FitOptions opt;
  opt.seed = 17;
  opt.random_starts = 3;
  auto [best, table] =
      select_k(d, {1, 2, 3}, ResponseKind::poisson_frequency, sel, opt);
  CHECK(table.best_K == 2);
  CHECK(best.K == 2);
  REQUIRE(table.rows.size() == 3);
  for (auto& row : table.rows) {
    REQUIRE(row.criteria.has_value());
    CHECK(row.failure.empty());
  }
  double b1 = table.rows[0].criteria->bic;
  double b2 = table.rows[1].criteria->bic;
  CHECK(b2 < b1);
}

TEST_CASE("infeasible K becomes a table annotation, not a failure") {
  Dataset d = selection_sample(82, 30);  // n = 60; K = 7 needs 70 rows
  Selections sel;
  sel.response = {"x"};
  FitOptions opt;
  opt.seed = 18;
  opt.random_starts = 2;
  auto [best, table] =
      select_k(d, {1, 7}, ResponseKind::poisson_frequency, sel, opt);
  CHECK(best.K == 1);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].criteria.has_value());
  CHECK_FALSE(table.rows[1].criteria.has_value());
  CHECK_FALSE(table.rows[1].failure.empty());
}

TEST_CASE("selection with every K infeasible throws") {
  Dataset d = selection_sample(83, 10);  // n = 20
  Selections sel;
  sel.response = {"x"};
  FitOptions opt;
  CHECK_THROWS_AS(
      select_k(d, {5, 6}, ResponseKind::poisson_frequency, sel, opt),
      convergence_error);
  CHECK_THROWS_AS(
      select_k(d, {}, ResponseKind::poisson_frequency, sel, opt),
      input_error);
  CHECK_THROWS_AS(
      select_k(d, {0}, ResponseKind::poisson_frequency, sel, opt),
      input_error);
}
