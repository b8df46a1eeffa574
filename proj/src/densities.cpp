#include "gcwm/densities.hpp"

#include "gcwm/errors.hpp"
#include "gcwm/kernels.hpp"

#include <cmath>
#include <limits>

namespace gcwm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

// log(exp(a) + exp(b)) without overflow.
double logaddexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}
}  // namespace

void GaussianMarginal::finalize() {
  const Eigen::Index p = mu.size();
  if (sigma.rows() != p || sigma.cols() != p)
    throw input_error("covariance dimension disagrees with mean");
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();

  // Degeneracy ridge: collapsed components can produce near-singular
  // weighted covariances mid-EM.
  double tr = sigma.trace();
  double scale = tr / static_cast<double>(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma,
                                                     Eigen::EigenvaluesOnly);
  double lambda_min = eig.eigenvalues().minCoeff();
  ridge_ = 0.0;
  if (scale <= 0.0 || !(lambda_min >= 1e-10 * scale)) {
    ridge_ = scale > 0.0 ? 1e-8 * scale : 1e-12;
    // A negative eigenvalue beyond the ridge means the matrix is not a
    // covariance at all; grow the ridge just enough to clear it.
    if (lambda_min + ridge_ <= 0.0) ridge_ += -lambda_min + 1e-12;
    sigma += ridge_ * Eigen::MatrixXd::Identity(p, p);
  }

  llt_.emplace(sigma);
  if (llt_->info() != Eigen::Success)
    throw convergence_error("covariance is not positive definite");
  logdet_ = 0.0;
  for (Eigen::Index j = 0; j < p; ++j)
    logdet_ += 2.0 * std::log(llt_->matrixLLT()(j, j));
}

double gaussian_logpdf(const Eigen::VectorXd& t, const GaussianMarginal& m) {
  if (!m.finalized())
    throw input_error("GaussianMarginal not finalized before evaluation");
  if (t.size() != m.mu.size())
    throw input_error("gaussian_logpdf: dimension mismatch");
  const double p = static_cast<double>(t.size());
  Eigen::VectorXd d = t - m.mu;
  Eigen::VectorXd half = m.llt().matrixL().solve(d);
  return -0.5 * (p * kLog2Pi + m.logdet() + half.squaredNorm());
}

void gaussian_logpdf_rows(const Eigen::MatrixXd& T, const GaussianMarginal& m,
                          double* out) {
  if (!m.finalized())
    throw input_error("GaussianMarginal not finalized before evaluation");
  const Eigen::Index n = T.rows();
  const double p = static_cast<double>(T.cols());
  // L^{-1} (t_i - mu) for all rows at once; squared column norms give the
  // quadratic forms.
  Eigen::MatrixXd centered = T.rowwise() - m.mu.transpose();
  Eigen::MatrixXd half = m.llt().matrixL().solve(centered.transpose());
  const double c = -0.5 * (p * kLog2Pi + m.logdet());
  for (Eigen::Index i = 0; i < n; ++i)
    out[i] = c - 0.5 * half.col(i).squaredNorm();
}

double lognormal_logpdf(const Eigen::VectorXd& u, const LogNormalMarginal& m) {
  if ((u.array() <= 0.0).any())
    throw input_error("lognormal_logpdf: all coordinates must be > 0");
  Eigen::VectorXd ln_u = u.array().log();
  return gaussian_logpdf(ln_u, m.log_scale) - ln_u.sum();
}

void lognormal_logpdf_rows(const Eigen::MatrixXd& LnU,
                           const LogNormalMarginal& m, double* out) {
  gaussian_logpdf_rows(LnU, m.log_scale, out);
  const Eigen::Index n = LnU.rows();
  for (Eigen::Index i = 0; i < n; ++i) out[i] -= LnU.row(i).sum();
}

double multinomial_logpmf(const std::vector<int>& w,
                          const MultinomialMarginal& m) {
  if (w.size() != m.gamma.size())
    throw input_error("multinomial_logpmf: covariate count mismatch");
  double total = 0.0;
  for (std::size_t r = 0; r < w.size(); ++r) {
    if (w[r] < 0 || w[r] >= m.gamma[r].size())
      throw input_error("multinomial_logpmf: level index out of range");
    total += std::log(m.gamma[r](w[r]));
  }
  return total;
}

std::pair<double, double> zip_links(const Eigen::RowVectorXd& xrow,
                                    const ZipConditional& z, double exposure) {
  double log_lambda = xrow.dot(z.beta);
  if (z.offset_log_exposure) log_lambda += std::log(exposure);
  double eta_psi = xrow.dot(z.beta_bar);
  double psi = 1.0 / (1.0 + std::exp(-eta_psi));
  return {std::exp(log_lambda), psi};
}

double log_logistic(double eta) {
  // log(1/(1+e^{-eta})) = -softplus(-eta)
  return eta >= 0.0 ? -std::log1p(std::exp(-eta))
                    : eta - std::log1p(std::exp(eta));
}

double log1m_logistic(double eta) { return log_logistic(-eta); }

double poisson_logpmf(double y, double eta, double log_exposure) {
  double log_lambda = eta + log_exposure;
  return y * log_lambda - std::exp(log_lambda) - std::lgamma(y + 1.0);
}

double zip_logpmf(double y, const Eigen::RowVectorXd& xrow,
                  const ZipConditional& z, double exposure) {
  double log_expo = z.offset_log_exposure ? std::log(exposure) : 0.0;
  double eta = xrow.dot(z.beta);
  double eta_psi = xrow.dot(z.beta_bar);
  double log_lambda = eta + log_expo;
  if (y == 0.0) {
    // log(psi + (1-psi) e^{-lambda}) done in log scale:
    // logaddexp(log psi, log(1-psi) - lambda)
    return logaddexp(log_logistic(eta_psi),
                     log1m_logistic(eta_psi) - std::exp(log_lambda));
  }
  return log1m_logistic(eta_psi) + y * log_lambda - std::exp(log_lambda) -
         std::lgamma(y + 1.0);
}

void poisson_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& beta,
                         const Eigen::VectorXd& log_exposure, double* out) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd log_lambda = X * beta;
  if (log_exposure.size() > 0) log_lambda += log_exposure;
  // out = y .* log_lambda - exp(log_lambda) - lgamma(y+1)
  Eigen::VectorXd lambda = log_lambda;
  kernels::exp_inplace(lambda.data(), static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    out[i] = y(i) * log_lambda(i) - lambda(i) - std::lgamma(y(i) + 1.0);
}

void zip_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                     const ZipConditional& z,
                     const Eigen::VectorXd& log_exposure, double* out) {
  zip_logpmf_rows(y, X, X, z, log_exposure, out);
}

void zip_logpmf_rows(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xp,
                     const Eigen::MatrixXd& Xb, const ZipConditional& z,
                     const Eigen::VectorXd& log_exposure, double* out) {
  const Eigen::Index n = Xp.rows();
  Eigen::VectorXd log_lambda = Xp * z.beta;
  if (z.offset_log_exposure && log_exposure.size() > 0)
    log_lambda += log_exposure;
  Eigen::VectorXd eta_psi = Xb * z.beta_bar;
  Eigen::VectorXd lambda = log_lambda;
  kernels::exp_inplace(lambda.data(), static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) == 0.0) {
      out[i] = logaddexp(log_logistic(eta_psi(i)),
                         log1m_logistic(eta_psi(i)) - lambda(i));
    } else {
      out[i] = log1m_logistic(eta_psi(i)) + y(i) * log_lambda(i) - lambda(i) -
               std::lgamma(y(i) + 1.0);
    }
  }
}

}  // namespace gcwm
