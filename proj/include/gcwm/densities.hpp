#pragma once

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace gcwm {

// Gaussian covariate-marginal block. finalize() must be called after the
// parameters change and before any evaluation: it symmetrizes sigma, applies
// the degeneracy ridge, and caches the Cholesky factor and log-determinant.
struct GaussianMarginal {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  void finalize();
  bool finalized() const { return llt_.has_value(); }
  double logdet() const { return logdet_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return *llt_; }
  double ridge() const { return ridge_; }

 private:
  std::optional<Eigen::LLT<Eigen::MatrixXd>> llt_;
  double logdet_ = 0.0;
  double ridge_ = 0.0;
};

// Multivariate log-normal: density of u when ln(u) is Gaussian(mu, sigma),
// i.e. the Gaussian density of ln(u) times the Jacobian prod(1/u_i).
struct LogNormalMarginal {
  GaussianMarginal log_scale;
};

// One probability vector per discrete covariate; entries are floored away
// from zero and renormalized at construction time by the M-step.
struct MultinomialMarginal {
  std::vector<Eigen::VectorXd> gamma;
};

// Zero-inflated Poisson response conditional. lambda = exposure * exp(x~ b')
// when offset_log_exposure is set (exposure multiplies the rate only);
// psi = logistic(x~ bbar').
struct ZipConditional {
  Eigen::VectorXd beta;
  Eigen::VectorXd beta_bar;
  bool offset_log_exposure = false;
};

double gaussian_logpdf(const Eigen::VectorXd& t, const GaussianMarginal& m);

// Batch evaluation over the rows of T; out must hold T.rows() values.
void gaussian_logpdf_rows(const Eigen::MatrixXd& T, const GaussianMarginal& m,
                          double* out);

double lognormal_logpdf(const Eigen::VectorXd& u, const LogNormalMarginal& m);

// LnU is the cached elementwise log of U (rows correspond).
void lognormal_logpdf_rows(const Eigen::MatrixXd& LnU,
                           const LogNormalMarginal& m, double* out);

double multinomial_logpmf(const std::vector<int>& w,
                          const MultinomialMarginal& m);

// (lambda, psi) for one design row; exposure multiplies lambda only.
std::pair<double, double> zip_links(const Eigen::RowVectorXd& xrow,
                                    const ZipConditional& z, double exposure);

double zip_logpmf(double y, const Eigen::RowVectorXd& xrow,
                  const ZipConditional& z, double exposure);

// log P(y) for Poisson with rate exposure * exp(eta).
double poisson_logpmf(double y, double eta, double log_exposure);

// Batch ZIP log-pmf for all rows of X (with per-row y and exposure).
void zip_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     const ZipConditional& z, const Eigen::VectorXd& log_exposure,
                     double* out);

// Same with separate designs for the count model (Xp, z.beta) and the
// zero model (Xb, z.beta_bar).
void zip_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xp,
                     const Eigen::MatrixXd& Xb, const ZipConditional& z,
                     const Eigen::VectorXd& log_exposure, double* out);

void poisson_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& log_exposure, double* out);

// log of logistic(eta) and log(1 - logistic(eta)), evaluated stably.
double log_logistic(double eta);
double log1m_logistic(double eta);

}  // namespace gcwm
