#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gcwm {

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;     // Wald; zero for dropped columns
  double dispersion = 0.0;        // Gaussian response variance
  bool has_dispersion = false;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;        // Bernoulli: monotone likelihood capped
  bool degenerate_dispersion = false;
  std::vector<int> dropped_columns;  // collinear columns fixed at 0
};

// Weighted Poisson regression with log link and additive log offset.
// Maximizes sum_i w_i [y_i (x_i b + o_i) - exp(x_i b + o_i) - log(y_i!)].
// A full-width `init` warm-starts the iteration; since only ascent steps
// are accepted, the returned log-likelihood never falls below the init's.
GlmFit fit_poisson_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& weights,
                            const Eigen::VectorXd& offset,
                            const Eigen::VectorXd& init = Eigen::VectorXd());

// Weighted Bernoulli regression with logit link; targets may be fractional.
// Maximizes sum_i w_i [t_i x_i b - log(1 + exp(x_i b))].
GlmFit fit_bernoulli_weighted(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& target,
                              const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& init = Eigen::VectorXd());

// Weighted least squares, identity link; dispersion is the weighted mean
// squared residual.
GlmFit fit_gaussian_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& weights);

// Gaussian response with log link: E[y] = exp(x b), weighted least squares
// criterion minimized by IRLS.
GlmFit fit_gaussian_log_link(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& weights);

}  // namespace gcwm
