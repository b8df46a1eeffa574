#include "gcwm/glm.hpp"

#include "gcwm/errors.hpp"
#include "gcwm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gcwm {

namespace {

constexpr double kRelTol = 1e-10;   // relative log-likelihood change
constexpr double kScoreTol = 1e-8;  // max-norm of the score
constexpr int kMaxIter = 100;
constexpr double kBetaCap = 30.0;   // separation guard (logit scale)

// Columns kept after collinearity screening on the weight-supported rows.
// Modified Gram-Schmidt in column order keeps the earliest independent set.
std::vector<int> independent_columns(const Eigen::MatrixXd& X,
                                     const Eigen::VectorXd& weights) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd sqw = weights.array().sqrt();
  std::vector<Eigen::VectorXd> basis;
  std::vector<int> kept;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd v = X.col(j).cwiseProduct(sqw);
    double orig = v.norm();
    for (const Eigen::VectorXd& b : basis) v -= b.dot(v) * b;
    double thresh = orig > 0.0 ? 1e-10 * orig : 0.0;
    if (v.norm() > thresh && v.norm() > 1e-12 * std::sqrt(double(n))) {
      basis.push_back(v / v.norm());
      kept.push_back(static_cast<int>(j));
    }
  }
  return kept;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X,
                               const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = X.col(cols[j]);
  return out;
}

// X' diag(w) X via the dot-product kernels (X is column-major).
Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const Eigen::VectorXd& w) {
  const Eigen::Index p = X.cols();
  const std::size_t n = static_cast<std::size_t>(X.rows());
  Eigen::MatrixXd H(p, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index l = j; l < p; ++l) {
      double v = kernels::weighted_dot(w.data(), X.col(j).data(),
                                       X.col(l).data(), n);
      H(j, l) = v;
      H(l, j) = v;
    }
  return H;
}

Eigen::VectorXd crossprod(const Eigen::MatrixXd& X, const Eigen::VectorXd& r) {
  const Eigen::Index p = X.cols();
  const std::size_t n = static_cast<std::size_t>(X.rows());
  Eigen::VectorXd g(p);
  for (Eigen::Index j = 0; j < p; ++j)
    g(j) = kernels::dot(X.col(j).data(), r.data(), n);
  return g;
}

Eigen::VectorXd solve_spd(Eigen::MatrixXd H, const Eigen::VectorXd& g) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    double ridge = 1e-10 * H.trace() / static_cast<double>(H.rows());
    if (ridge <= 0.0) ridge = 1e-12;
    for (int attempt = 0; attempt < 8 && llt.info() != Eigen::Success;
         ++attempt, ridge *= 100.0) {
      Eigen::MatrixXd Hr =
          H + ridge * Eigen::MatrixXd::Identity(H.rows(), H.cols());
      llt.compute(Hr);
    }
    if (llt.info() != Eigen::Success)
      throw convergence_error("normal equations not solvable");
  }
  return llt.solve(g);
}

// Scatters the reduced-column fit back to full width and attaches Wald
// standard errors from the final information matrix.
void expand_fit(GlmFit& fit, const std::vector<int>& kept,
                const Eigen::VectorXd& beta_kept,
                const Eigen::MatrixXd& info_kept, double var_scale,
                Eigen::Index p_full) {
  fit.coefficients = Eigen::VectorXd::Zero(p_full);
  fit.std_errors = Eigen::VectorXd::Zero(p_full);
  Eigen::MatrixXd cov;
  Eigen::LLT<Eigen::MatrixXd> llt(info_kept);
  bool have_cov = llt.info() == Eigen::Success;
  if (have_cov)
    cov = llt.solve(
        Eigen::MatrixXd::Identity(info_kept.rows(), info_kept.cols()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    fit.coefficients(kept[j]) = beta_kept(static_cast<Eigen::Index>(j));
    if (have_cov) {
      double v = var_scale * cov(static_cast<Eigen::Index>(j),
                                 static_cast<Eigen::Index>(j));
      fit.std_errors(kept[j]) = v > 0.0 ? std::sqrt(v) : 0.0;
    }
  }
  for (int j = 0; j < static_cast<int>(p_full); ++j)
    if (std::find(kept.begin(), kept.end(), j) == kept.end())
      fit.dropped_columns.push_back(j);
}

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w) {
  if (X.rows() != y.size() || X.rows() != w.size())
    throw input_error("glm: row counts disagree");
  if ((w.array() < 0.0).any())
    throw input_error("glm: negative weights");
  if (!(w.sum() > 0.0)) throw input_error("glm: sum of weights must be > 0");
}

}  // namespace

GlmFit fit_poisson_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& weights,
                            const Eigen::VectorXd& offset,
                            const Eigen::VectorXd& init) {
  check_inputs(X, y, weights);
  if ((y.array() < 0.0).any())
    throw input_error("poisson glm: negative response");
  Eigen::VectorXd o = offset.size() > 0
                          ? offset
                          : Eigen::VectorXd::Zero(X.rows()).eval();
  if (o.size() != X.rows()) throw input_error("poisson glm: offset length");

  std::vector<int> kept = independent_columns(X, weights);
  Eigen::MatrixXd Xk = select_columns(X, kept);
  const Eigen::Index n = Xk.rows(), p = Xk.cols();
  const std::size_t ns = static_cast<std::size_t>(n);

  // Constant part of the log-likelihood.
  double const_term = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    const_term -= weights(i) * std::lgamma(y(i) + 1.0);

  auto loglik_at = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& eta,
                       Eigen::VectorXd& mu) {
    eta = Xk * beta + o;
    mu = eta;
    kernels::exp_inplace(mu.data(), ns);
    double ll = const_term;
    for (Eigen::Index i = 0; i < n; ++i)
      ll += weights(i) * (y(i) * eta(i) - mu(i));
    return ll;
  };

  // Start at the intercept-only estimate of the average rate.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  {
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num += weights(i) * y(i);
      den += weights(i) * std::exp(o(i));
    }
    if (num > 0.0 && den > 0.0 && p > 0) beta(0) = std::log(num / den);
    if (num == 0.0 && p > 0) beta(0) = -30.0;  // all-zero response
  }

  GlmFit fit;
  Eigen::VectorXd eta, mu;
  double ll = loglik_at(beta, eta, mu);
  if (init.size() == X.cols()) {
    Eigen::VectorXd beta0(p);
    for (Eigen::Index j = 0; j < p; ++j) beta0(j) = init(kept[j]);
    Eigen::VectorXd eta0, mu0;
    double ll0 = loglik_at(beta0, eta0, mu0);
    if (std::isfinite(ll0) && ll0 > ll) {
      beta.swap(beta0);
      eta.swap(eta0);
      mu.swap(mu0);
      ll = ll0;
    }
  }
  Eigen::MatrixXd info(p, p);
  for (fit.iterations = 0; fit.iterations < kMaxIter; ++fit.iterations) {
    Eigen::VectorXd wmu = weights.cwiseProduct(mu);
    info = gram(Xk, wmu);
    Eigen::VectorXd score = crossprod(Xk, weights.cwiseProduct(y - mu));
    if (score.size() == 0) break;
    if (score.cwiseAbs().maxCoeff() < kScoreTol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd step = solve_spd(info, score);
    double scale = 1.0;
    Eigen::VectorXd beta_new, eta_new, mu_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      beta_new = beta + scale * step;
      ll_new = loglik_at(beta_new, eta_new, mu_new);
      if (std::isfinite(ll_new) && ll_new >= ll) break;
    }
    if (!(ll_new >= ll)) {  // no ascent possible
      fit.converged = score.cwiseAbs().maxCoeff() < 1e-4;
      break;
    }
    double change = ll_new - ll;
    beta.swap(beta_new);
    eta.swap(eta_new);
    mu.swap(mu_new);
    ll = ll_new;
    if (change < kRelTol * (std::abs(ll) + 1.0)) {
      fit.converged = true;
      ++fit.iterations;
      break;
    }
  }
  // Final information matrix at the accepted iterate.
  info = gram(Xk, weights.cwiseProduct(mu).eval());
  fit.loglik = ll;
  expand_fit(fit, kept, beta, info, 1.0, X.cols());
  return fit;
}

GlmFit fit_bernoulli_weighted(const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& target,
                              const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& init) {
  check_inputs(X, target, weights);
  if ((target.array() < 0.0).any() || (target.array() > 1.0).any())
    throw input_error("bernoulli glm: targets must lie in [0, 1]");

  std::vector<int> kept = independent_columns(X, weights);
  Eigen::MatrixXd Xk = select_columns(X, kept);
  const Eigen::Index n = Xk.rows(), p = Xk.cols();

  auto loglik_at = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& eta) {
    eta = Xk * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // t*eta - softplus(eta), stable on both tails
      double e = eta(i);
      double softplus = e > 0.0 ? e + std::log1p(std::exp(-e))
                                : std::log1p(std::exp(e));
      ll += weights(i) * (target(i) * e - softplus);
    }
    return ll;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  {
    double num = 0.0, den = weights.sum();
    for (Eigen::Index i = 0; i < n; ++i) num += weights(i) * target(i);
    double pbar = std::min(1.0 - 1e-6, std::max(1e-6, num / den));
    if (p > 0) beta(0) = std::log(pbar / (1.0 - pbar));
  }

  GlmFit fit;
  Eigen::VectorXd eta;
  double ll = loglik_at(beta, eta);
  if (init.size() == X.cols()) {
    Eigen::VectorXd beta0(p);
    for (Eigen::Index j = 0; j < p; ++j) beta0(j) = init(kept[j]);
    Eigen::VectorXd eta0;
    double ll0 = loglik_at(beta0, eta0);
    if (std::isfinite(ll0) && ll0 > ll) {
      beta.swap(beta0);
      eta.swap(eta0);
      ll = ll0;
    }
  }
  Eigen::MatrixXd info(p, p);
  Eigen::VectorXd prob(n);
  auto fill_prob = [&](const Eigen::VectorXd& e) {
    for (Eigen::Index i = 0; i < n; ++i)
      prob(i) = 1.0 / (1.0 + std::exp(-e(i)));
  };
  fill_prob(eta);
  for (fit.iterations = 0; fit.iterations < kMaxIter; ++fit.iterations) {
    Eigen::VectorXd wvar =
        weights.cwiseProduct(prob.cwiseProduct((1.0 - prob.array()).matrix()));
    info = gram(Xk, wvar);
    Eigen::VectorXd score = crossprod(Xk, weights.cwiseProduct(target - prob));
    if (score.size() == 0) break;
    if (score.cwiseAbs().maxCoeff() < kScoreTol) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd step = solve_spd(info, score);
    double scale = 1.0;
    Eigen::VectorXd beta_new, eta_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      beta_new = beta + scale * step;
      ll_new = loglik_at(beta_new, eta_new);
      if (std::isfinite(ll_new) && ll_new >= ll) break;
    }
    if (!(ll_new >= ll)) {
      fit.converged = score.cwiseAbs().maxCoeff() < 1e-4;
      break;
    }
    // Separation guard: a monotone likelihood walks coefficients to
    // infinity; cap and continue so fractional EM targets stay usable.
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(beta_new(j)) > kBetaCap) {
        beta_new(j) = beta_new(j) > 0.0 ? kBetaCap : -kBetaCap;
        fit.separation = true;
      }
    }
    if (fit.separation) ll_new = loglik_at(beta_new, eta_new);
    double change = ll_new - ll;
    beta.swap(beta_new);
    eta.swap(eta_new);
    ll = ll_new;
    fill_prob(eta);
    if (change >= 0.0 && change < kRelTol * (std::abs(ll) + 1.0)) {
      fit.converged = true;
      ++fit.iterations;
      break;
    }
  }
  Eigen::VectorXd wvar =
      weights.cwiseProduct(prob.cwiseProduct((1.0 - prob.array()).matrix()));
  info = gram(Xk, wvar);
  fit.loglik = ll;
  expand_fit(fit, kept, beta, info, 1.0, X.cols());
  return fit;
}

GlmFit fit_gaussian_weighted(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& weights) {
  check_inputs(X, y, weights);
  std::vector<int> kept = independent_columns(X, weights);
  Eigen::MatrixXd Xk = select_columns(X, kept);

  Eigen::MatrixXd info = gram(Xk, weights);
  Eigen::VectorXd beta = solve_spd(info, crossprod(Xk, weights.cwiseProduct(y)));

  GlmFit fit;
  fit.has_dispersion = true;
  fit.converged = true;
  fit.iterations = 1;
  Eigen::VectorXd resid = y - Xk * beta;
  double W = weights.sum();
  fit.dispersion = resid.cwiseProduct(resid).dot(weights) / W;
  if (fit.dispersion <= 0.0 ||
      fit.dispersion < 1e-14 * y.cwiseProduct(y).dot(weights) / W) {
    fit.degenerate_dispersion = true;
  }
  fit.loglik =
      fit.dispersion > 0.0
          ? -0.5 * W * (std::log(2.0 * M_PI * fit.dispersion) + 1.0)
          : std::numeric_limits<double>::infinity();
  expand_fit(fit, kept, beta, info, fit.dispersion, X.cols());
  return fit;
}

GlmFit fit_gaussian_log_link(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& weights) {
  check_inputs(X, y, weights);
  std::vector<int> kept = independent_columns(X, weights);
  Eigen::MatrixXd Xk = select_columns(X, kept);
  const Eigen::Index n = Xk.rows(), p = Xk.cols();
  const std::size_t ns = static_cast<std::size_t>(n);

  auto sse_at = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& mu) {
    mu = Xk * beta;
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = std::min(mu(i), 350.0);
    kernels::exp_inplace(mu.data(), ns);
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double r = y(i) - mu(i);
      sse += weights(i) * r * r;
    }
    return sse;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  {
    double ybar = y.cwiseProduct(weights).sum() / weights.sum();
    if (p > 0) beta(0) = std::log(std::max(ybar, 1e-8));
  }

  GlmFit fit;
  fit.has_dispersion = true;
  Eigen::VectorXd mu;
  double sse = sse_at(beta, mu);
  Eigen::MatrixXd info(p, p);
  for (fit.iterations = 0; fit.iterations < kMaxIter; ++fit.iterations) {
    // Gauss-Newton for min sum w (y - exp(eta))^2: gradient steps use the
    // Jacobian diag(mu) X.
    Eigen::VectorXd wmu2 = weights.cwiseProduct(mu.cwiseProduct(mu));
    info = gram(Xk, wmu2);
    Eigen::VectorXd score =
        crossprod(Xk, weights.cwiseProduct(mu.cwiseProduct(y - mu)));
    if (score.size() == 0) break;
    if (score.cwiseAbs().maxCoeff() < kScoreTol * (1.0 + sse)) {
      fit.converged = true;
      break;
    }
    Eigen::VectorXd step = solve_spd(info, score);
    double scale = 1.0;
    Eigen::VectorXd beta_new, mu_new;
    double sse_new = std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      beta_new = beta + scale * step;
      sse_new = sse_at(beta_new, mu_new);
      if (std::isfinite(sse_new) && sse_new <= sse) break;
    }
    if (!(sse_new <= sse)) break;
    double change = sse - sse_new;
    beta.swap(beta_new);
    mu.swap(mu_new);
    sse = sse_new;
    if (change < kRelTol * (sse + 1.0)) {
      fit.converged = true;
      ++fit.iterations;
      break;
    }
  }
  double W = weights.sum();
  fit.dispersion = sse / W;
  if (fit.dispersion <= 0.0) fit.degenerate_dispersion = true;
  fit.loglik =
      fit.dispersion > 0.0
          ? -0.5 * W * (std::log(2.0 * M_PI * fit.dispersion) + 1.0)
          : std::numeric_limits<double>::infinity();
  Eigen::VectorXd wmu2 = weights.cwiseProduct(mu.cwiseProduct(mu));
  info = gram(Xk, wmu2);
  expand_fit(fit, kept, beta, info, fit.dispersion, X.cols());
  return fit;
}

}  // namespace gcwm
