#pragma once

#include "gcwm/data.hpp"
#include "gcwm/densities.hpp"
#include "gcwm/glm.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gcwm {

enum class ResponseKind {
  gaussian_severity,   // identity link; claim weights scale the conditional
  poisson_frequency,   // log link with log-exposure offset
  bernoulli_zero,      // logit link on the zero indicator 1{y == 0}
  zip_frequency        // zero-inflated Poisson (two-stage fit)
};

const char* response_kind_name(ResponseKind kind);
ResponseKind response_kind_from_name(const std::string& name);

// Covariate names entering each design. `response` drives the
// severity/count conditional; `bernoulli` drives the zero model (both the
// partitioning fit and the ZIP zero component).
struct Selections {
  std::vector<std::string> response;
  std::vector<std::string> bernoulli;
};

struct ComponentParams {
  double tau = 0.0;
  GlmFit glm;  // response conditional; the count part for ZIP components
  std::optional<GaussianMarginal> gaussian;
  std::optional<LogNormalMarginal> lognormal;
  std::optional<MultinomialMarginal> discrete;
  std::optional<ZipConditional> zip;    // set when zero inflation is kept
  std::optional<GlmFit> zip_bernoulli;  // zero-model fit behind `zip`
};

struct GcwmModel {
  int K = 0;
  ResponseKind response_kind = ResponseKind::gaussian_severity;
  std::vector<ComponentParams> components;
  Eigen::MatrixXd posteriors;        // n x K; rows sum to 1
  std::vector<double> loglik_trace;  // observed log-likelihood per iteration
  double loglik = 0.0;
  int n_params = 0;
  bool converged = false;
  Selections selections;
  std::uint64_t seed = 0;
  std::vector<int> hard_labels;  // argmax posterior; lowest index on ties

  // Recorded by the two-stage zero-inflated fit: response-conditional
  // log-likelihoods per cluster on the frozen partition (Poisson null vs
  // ZIP alternative), feeding the likelihood-ratio test.
  std::vector<double> cluster_loglik_poisson;
  std::vector<double> cluster_loglik_zip;
  std::vector<GlmFit> cluster_poisson_fits;  // per-cluster null fits
  std::vector<int> partition_labels;  // the frozen hard partition
  int zero_model_df = 0;              // zero-design width, intercept included
};

// One cluster's zero-inflated Poisson fit (inner EM).
struct ZipFit {
  Eigen::VectorXd beta;      // count-model coefficients
  Eigen::VectorXd beta_bar;  // zero-model coefficients
  Eigen::VectorXd zstar;     // posterior structural-zero means; 0 where y > 0
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  bool poisson_only = false;    // cluster had no zeros
  bool bernoulli_only = false;  // cluster had nothing but zeros
  GlmFit poisson_fit;           // final M-step fits (with standard errors)
  GlmFit bernoulli_fit;
};

struct StopRule {
  double aitken_tol = 1e-5;
  int max_iter = 500;
};

struct FitOptions {
  std::uint64_t seed = 0;
  int random_starts = 10;
  bool distance_start = true;
  // When nonempty (length n, values in [0, K)), a single run starts from
  // these hard labels instead of the restart schedule.
  std::vector<int> user_labels;
  StopRule stop;
  int threads = 0;  // 0 = GCWM_THREADS environment variable, default 1
};

struct EstepResult {
  Eigen::MatrixXd posteriors;
  double loglik = 0.0;
};

// Posterior membership probabilities under the model, log-scale with
// log-sum-exp. Throws convergence_error if some row has zero density
// under every component.
EstepResult estep(const Dataset& data, const GcwmModel& model);

// Closed-form parameter updates plus the weighted GLM block. Throws
// component_collapse when a posterior column mass drops below 1e-3 * n / K.
std::vector<ComponentParams> mstep(const Dataset& data,
                                   const Eigen::MatrixXd& posteriors,
                                   ResponseKind kind,
                                   const Selections& selections);

// Full EM fit: best of the restart schedule by final log-likelihood.
// Throws sizing_error when n < 5 * K * design-width, convergence_error when
// every restart collapsed.
GcwmModel fit_gcwm(const Dataset& data, int K, ResponseKind kind,
                   const Selections& selections, const FitOptions& options);

// Inner EM for one cluster's zero-inflated Poisson conditional.
// cluster_weights is the (frozen) membership weight per row; initial
// coefficients normally come from the partitioning fits. Empty inits are
// replaced by a plain Poisson fit / zeros.
ZipFit fit_zip_cluster(const Dataset& data,
                       const Eigen::VectorXd& cluster_weights,
                       const std::vector<std::string>& poisson_selection,
                       const std::vector<std::string>& bernoulli_selection,
                       const Eigen::VectorXd& beta_init,
                       const Eigen::VectorXd& beta_bar_init);

// Two-stage zero-inflated fit: Poisson + Bernoulli partitioning fits,
// component alignment, frozen hard partition, per-cluster ZIP EM, and a
// per-cluster likelihood-ratio demotion back to plain Poisson.
GcwmModel fit_zigcwm(const Dataset& data, int K, const Selections& selections,
                     const FitOptions& options);

// The all-Poisson variant of a zero-inflated model on the same frozen
// partition: every cluster's conditional swapped for its Poisson null fit.
// Serves as the null document for the likelihood-ratio test workflow.
GcwmModel strip_zero_inflation(const Dataset& data, const GcwmModel& model);

// Free-parameter count: (K-1) mixing weights plus per-component GLM
// coefficients (+1 dispersion where present), Gaussian/log-normal blocks
// p + p(p+1)/2 each, discrete blocks sum(c_r - 1), and zero-model
// coefficients where zero inflation is kept.
int count_free_params(const GcwmModel& model);

// argmax per row, lowest index on exact ties.
std::vector<int> hard_assignment(const Eigen::MatrixXd& posteriors);

}  // namespace gcwm
