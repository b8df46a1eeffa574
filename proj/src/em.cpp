#include "gcwm/em.hpp"

#include "gcwm/errors.hpp"
#include "gcwm/kernels.hpp"
#include "gcwm/rng.hpp"
#include "gcwm/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace gcwm {

using rng::derive_seed;
using rng::Rng;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kCollapseFactor = 1e-3;  // floor is 1e-3 * n / K
constexpr double kZipRelTol = 1e-8;
constexpr int kZipMaxIter = 300;
// Zero-model intercept for a psi -> 0 boundary fit: logistic(-30) ~ 9.4e-14.
constexpr double kPsiFloorIntercept = -30.0;

struct Designs {
  Eigen::MatrixXd X;        // conditional design for the response kind
  Eigen::MatrixXd Xb;       // zero-model design (zero-inflated kind only)
  Eigen::VectorXd targets;  // response, or zero indicator for the zero model
};

Designs make_designs(const Dataset& ds, ResponseKind kind,
                     const Selections& sel) {
  Designs d;
  if (kind == ResponseKind::bernoulli_zero) {
    d.X = build_design(ds, sel.bernoulli).X;
    d.targets = (ds.response().array() == 0.0).cast<double>();
  } else {
    d.X = build_design(ds, sel.response).X;
    d.targets = ds.response();
    if (kind == ResponseKind::zip_frequency)
      d.Xb = build_design(ds, sel.bernoulli).X;
  }
  return d;
}

// log tau_k + w_i log q(y_i | x_i) + log p(t_i) + log p(w_i) + log p(u_i)
// for every row, written into out. buf is scratch of the same length.
void component_logdens(const Dataset& ds, const Designs& dg, ResponseKind kind,
                       const ComponentParams& c, Eigen::VectorXd& out,
                       Eigen::VectorXd& buf) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
  const std::size_t ns = static_cast<std::size_t>(n);
  out.setConstant(n, c.tau > 0.0
                         ? std::log(c.tau)
                         : -std::numeric_limits<double>::infinity());

  switch (kind) {
    case ResponseKind::gaussian_severity: {
      const double nu = c.glm.dispersion;
      if (!(nu > 0.0))
        throw convergence_error("severity component has nonpositive variance");
      Eigen::VectorXd mu = dg.X * c.glm.coefficients;
      const double cst = -0.5 * (kLog2Pi + std::log(nu));
      for (Eigen::Index i = 0; i < n; ++i) {
        double r = dg.targets(i) - mu(i);
        buf(i) = cst - 0.5 * r * r / nu;
      }
      break;
    }
    case ResponseKind::poisson_frequency:
      poisson_logpmf_rows(ds.response(), dg.X, c.glm.coefficients,
                          ds.log_exposure(), buf.data());
      break;
    case ResponseKind::bernoulli_zero: {
      Eigen::VectorXd eta = dg.X * c.glm.coefficients;
      for (Eigen::Index i = 0; i < n; ++i)
        buf(i) = dg.targets(i) > 0.5 ? log_logistic(eta(i))
                                     : log1m_logistic(eta(i));
      break;
    }
    case ResponseKind::zip_frequency:
      if (c.zip) {
        zip_logpmf_rows(ds.response(), dg.X, dg.Xb, *c.zip, ds.log_exposure(),
                        buf.data());
      } else {
        poisson_logpmf_rows(ds.response(), dg.X, c.glm.coefficients,
                            ds.log_exposure(), buf.data());
      }
      break;
  }
  // The conditional enters claim-weighted (weights default to ones).
  out += ds.claim_weights().cwiseProduct(buf);

  if (c.gaussian) {
    gaussian_logpdf_rows(ds.gaussian(), *c.gaussian, buf.data());
    kernels::add_inplace(out.data(), buf.data(), ns);
  }
  if (c.lognormal) {
    lognormal_logpdf_rows(ds.log_lognormal(), *c.lognormal, buf.data());
    kernels::add_inplace(out.data(), buf.data(), ns);
  }
  if (c.discrete) {
    for (std::size_t r = 0; r < ds.n_discrete(); ++r) {
      Eigen::VectorXd lg = c.discrete->gamma[r].array().log();
      const Eigen::VectorXi& idx = ds.discrete()[r];
      for (Eigen::Index i = 0; i < n; ++i) out(i) += lg(idx(i));
    }
  }
}

struct EstepCore {
  Eigen::MatrixXd post;
  double loglik = 0.0;
};

EstepCore estep_core(const Dataset& ds, const Designs& dg, ResponseKind kind,
                     const std::vector<ComponentParams>& comps) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
  const Eigen::Index K = static_cast<Eigen::Index>(comps.size());
  const std::size_t ns = static_cast<std::size_t>(n);
  Eigen::MatrixXd L(n, K);
  Eigen::VectorXd col(n), buf(n);
  for (Eigen::Index k = 0; k < K; ++k) {
    component_logdens(ds, dg, kind, comps[k], col, buf);
    L.col(k) = col;
  }
  // Row-wise log-sum-exp.
  Eigen::VectorXd m = L.col(0);
  for (Eigen::Index k = 1; k < K; ++k)
    kernels::max_inplace(m.data(), L.col(k).data(), ns);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(m(i))) {
      std::ostringstream msg;
      msg << "row " << i << " has zero density under every component";
      throw convergence_error(msg.str());
    }
  }
  for (Eigen::Index k = 0; k < K; ++k)
    kernels::sub_inplace(L.col(k).data(), m.data(), ns);
  kernels::exp_inplace(L.data(), ns * static_cast<std::size_t>(K));
  Eigen::VectorXd s = L.rowwise().sum();
  for (Eigen::Index k = 0; k < K; ++k) L.col(k).array() /= s.array();

  EstepCore out;
  out.post = std::move(L);
  kernels::log_inplace(s.data(), ns);
  out.loglik = kernels::sum(m.data(), ns) + kernels::sum(s.data(), ns);
  return out;
}

// Posterior-weighted mean and covariance; s = sum of weights.
GaussianMarginal weighted_gaussian(const Eigen::MatrixXd& T,
                                   const Eigen::Ref<const Eigen::VectorXd>& w,
                                   double s) {
  GaussianMarginal g;
  g.mu = T.transpose() * w / s;
  Eigen::MatrixXd centered = T.rowwise() - g.mu.transpose();
  g.sigma = centered.transpose() * w.asDiagonal() * centered / s;
  g.finalize();
  return g;
}

void update_marginals(const Dataset& ds,
                      const Eigen::Ref<const Eigen::VectorXd>& w, double s,
                      ComponentParams& c) {
  if (ds.p_gaussian() > 0) c.gaussian = weighted_gaussian(ds.gaussian(), w, s);
  if (ds.p_lognormal() > 0) {
    LogNormalMarginal ln;
    ln.log_scale = weighted_gaussian(ds.log_lognormal(), w, s);
    c.lognormal = std::move(ln);
  }
  if (ds.n_discrete() > 0) {
    MultinomialMarginal m;
    const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
    for (std::size_t r = 0; r < ds.n_discrete(); ++r) {
      const Eigen::VectorXi& idx = ds.discrete()[r];
      Eigen::VectorXd g = Eigen::VectorXd::Zero(
          static_cast<Eigen::Index>(ds.discrete_specs()[r].levels.size()));
      for (Eigen::Index i = 0; i < n; ++i) g(idx(i)) += w(i);
      g /= s;
      g = g.cwiseMax(1e-10);  // keep log finite for unobserved levels
      g /= g.sum();
      m.gamma.push_back(std::move(g));
    }
    c.discrete = std::move(m);
  }
}

std::vector<ComponentParams> mstep_core(
    const Dataset& ds, const Designs& dg, ResponseKind kind,
    const Eigen::MatrixXd& P, const std::vector<ComponentParams>* prev) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
  const Eigen::Index K = P.cols();
  if (P.rows() != n)
    throw input_error("mstep: posterior rows disagree with the data");
  const double floor = kCollapseFactor * static_cast<double>(n) /
                       static_cast<double>(K);
  std::vector<ComponentParams> comps(static_cast<std::size_t>(K));
  const Eigen::VectorXd none;
  for (Eigen::Index k = 0; k < K; ++k) {
    double s = kernels::sum(P.col(k).data(), static_cast<std::size_t>(n));
    if (!(s >= floor)) {
      std::ostringstream msg;
      msg << "component " << k << " collapsed (posterior mass " << s << " < "
          << floor << ")";
      throw component_collapse(msg.str());
    }
    ComponentParams& c = comps[static_cast<std::size_t>(k)];
    c.tau = s / static_cast<double>(n);
    update_marginals(ds, P.col(k), s, c);

    Eigen::VectorXd wk = P.col(k).cwiseProduct(ds.claim_weights());
    const Eigen::VectorXd& init =
        prev ? (*prev)[static_cast<std::size_t>(k)].glm.coefficients : none;
    switch (kind) {
      case ResponseKind::gaussian_severity:
        c.glm = fit_gaussian_weighted(dg.X, dg.targets, wk);
        if (c.glm.degenerate_dispersion) {
          std::ostringstream msg;
          msg << "component " << k << " response variance degenerated";
          throw component_collapse(msg.str());
        }
        break;
      case ResponseKind::poisson_frequency:
        c.glm = fit_poisson_weighted(dg.X, dg.targets, wk, ds.log_exposure(),
                                     init);
        break;
      case ResponseKind::bernoulli_zero:
        c.glm = fit_bernoulli_weighted(dg.X, dg.targets, wk, init);
        break;
      case ResponseKind::zip_frequency:
        throw input_error(
            "zero-inflated conditionals are fit by the two-stage procedure");
    }
  }
  return comps;
}

// Stop when the Aitken-extrapolated asymptote exceeds the current value by
// less than tol: a = d2/d1, linf = l1 + d2/(1-a), stop on 0 <= linf-l1 < tol.
bool aitken_converged(const std::vector<double>& t, double tol) {
  const std::size_t s = t.size();
  if (s < 3) return false;
  const double l0 = t[s - 3], l1 = t[s - 2], l2 = t[s - 1];
  const double d1 = l1 - l0, d2 = l2 - l1;
  if (std::abs(d1) < 1e-12 * (std::abs(l1) + 1.0) &&
      std::abs(d2) < 1e-12 * (std::abs(l2) + 1.0))
    return true;  // hard plateau
  if (!(d1 > 0.0)) return false;
  const double a = d2 / d1;
  if (!(a < 1.0)) return false;
  const double gain = d2 / (1.0 - a);
  return gain >= 0.0 && gain < tol;
}

struct EmRun {
  std::vector<ComponentParams> comps;
  Eigen::MatrixXd post;
  std::vector<double> trace;
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
};

EmRun em_run(const Dataset& ds, const Designs& dg, ResponseKind kind,
             Eigen::MatrixXd P, const StopRule& stop) {
  EmRun run;
  const std::vector<ComponentParams>* prev = nullptr;
  for (int it = 0; it < stop.max_iter; ++it) {
    run.comps = mstep_core(ds, dg, kind, P, prev);
    prev = &run.comps;
    EstepCore ec = estep_core(ds, dg, kind, run.comps);
    P = std::move(ec.post);
    run.trace.push_back(ec.loglik);
    if (aitken_converged(run.trace, stop.aitken_tol)) {
      run.converged = true;
      break;
    }
  }
  run.post = std::move(P);
  run.loglik = run.trace.back();
  return run;
}

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int K) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(labels.size()), K);
  for (std::size_t i = 0; i < labels.size(); ++i)
    P(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return P;
}

Eigen::MatrixXd random_hard_posteriors(std::size_t n, int K,
                                       std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = std::min(K - 1, static_cast<int>(rng.uniform() * K));
  return one_hot(labels, K);
}

// Hard partition from a k-means pass on the standardized continuous
// covariates: farthest-first seeding, then Lloyd iterations.
Eigen::MatrixXd distance_posteriors(const Dataset& ds, int K,
                                    std::uint64_t seed) {
  const Eigen::Index n = static_cast<Eigen::Index>(ds.n());
  const Eigen::Index pg = ds.p_gaussian(), pl = ds.p_lognormal();
  const Eigen::Index pc = pg + pl;
  if (pc == 0) return random_hard_posteriors(ds.n(), K, seed);

  Eigen::MatrixXd Z(n, pc);
  if (pg > 0) Z.leftCols(pg) = ds.gaussian();
  if (pl > 0) Z.rightCols(pl) = ds.log_lognormal();
  for (Eigen::Index j = 0; j < pc; ++j) {
    double mean = Z.col(j).mean();
    double var = (Z.col(j).array() - mean).square().sum() /
                 static_cast<double>(n);
    double sd = std::sqrt(std::max(var, 1e-24));
    Z.col(j) = (Z.col(j).array() - mean) / sd;
  }

  Rng rng(seed);
  std::vector<Eigen::Index> centers;
  centers.push_back(std::min<Eigen::Index>(
      n - 1, static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n))));
  Eigen::VectorXd mind =
      (Z.rowwise() - Z.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    Eigen::Index best = 0;
    mind.maxCoeff(&best);
    centers.push_back(best);
    mind = mind.cwiseMin(
        (Z.rowwise() - Z.row(best)).rowwise().squaredNorm().eval());
  }
  Eigen::MatrixXd C(K, pc);
  for (int k = 0; k < K; ++k) C.row(k) = Z.row(centers[static_cast<std::size_t>(k)]);

  std::vector<int> asg(static_cast<std::size_t>(n), -1);
  Eigen::MatrixXd D(n, K);
  for (int pass = 0; pass < 50; ++pass) {
    for (int k = 0; k < K; ++k)
      D.col(k) = (Z.rowwise() - C.row(k)).rowwise().squaredNorm();
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index k = 0;
      D.row(i).minCoeff(&k);  // first minimum: lowest index on ties
      if (asg[static_cast<std::size_t>(i)] != static_cast<int>(k)) {
        asg[static_cast<std::size_t>(i)] = static_cast<int>(k);
        changed = true;
      }
    }
    if (!changed) break;
    C.setZero();
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K);
    for (Eigen::Index i = 0; i < n; ++i) {
      C.row(asg[static_cast<std::size_t>(i)]) += Z.row(i);
      cnt(asg[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int k = 0; k < K; ++k) {
      if (cnt(k) > 0.0) {
        C.row(k) /= cnt(k);
      } else {
        // Re-seed an empty cluster at the row farthest from its center.
        Eigen::Index far = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          double d = D(i, asg[static_cast<std::size_t>(i)]);
          if (d > best) {
            best = d;
            far = i;
          }
        }
        C.row(k) = Z.row(far);
      }
    }
  }
  return one_hot(asg, K);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GCWM_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

struct StartOutcome {
  std::optional<EmRun> run;
  std::string failure;
  std::exception_ptr fatal;
};

std::vector<StartOutcome> run_starts(const Dataset& ds, const Designs& dg,
                                     ResponseKind kind,
                                     std::vector<Eigen::MatrixXd>& starts,
                                     const StopRule& stop, int threads) {
  std::vector<StartOutcome> out(starts.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= starts.size()) return;
      try {
        out[i].run = em_run(ds, dg, kind, std::move(starts[i]), stop);
      } catch (const component_collapse& e) {
        out[i].failure = e.what();
      } catch (const convergence_error& e) {
        out[i].failure = e.what();
      } catch (...) {
        out[i].fatal = std::current_exception();
      }
    }
  };
  int T = std::min<int>(threads, static_cast<int>(starts.size()));
  if (T <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

double zip_weighted_loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xp,
                           const Eigen::MatrixXd& Xb,
                           const Eigen::VectorXd& beta,
                           const Eigen::VectorXd& beta_bar,
                           const Eigen::VectorXd& log_exposure,
                           const Eigen::VectorXd& w, Eigen::VectorXd& buf) {
  ZipConditional z;
  z.beta = beta;
  z.beta_bar = beta_bar;
  z.offset_log_exposure = true;
  zip_logpmf_rows(y, Xp, Xb, z, log_exposure, buf.data());
  return kernels::dot(w.data(), buf.data(), static_cast<std::size_t>(y.size()));
}

// Posterior structural-zero means at the given coefficients; lambda
// includes the exposure offset.
Eigen::VectorXd zip_zstar(const Eigen::VectorXd& y, const Eigen::MatrixXd& Xp,
                          const Eigen::MatrixXd& Xb,
                          const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& beta_bar,
                          const Eigen::VectorXd& log_exposure) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd lambda = Xp * beta;
  if (log_exposure.size() > 0) lambda += log_exposure;
  kernels::exp_inplace(lambda.data(), static_cast<std::size_t>(n));
  Eigen::VectorXd eta_b = Xb * beta_bar;
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) > 0.0) {
      z(i) = 0.0;
    } else {
      double v = 1.0 / (1.0 + std::exp(-(eta_b(i) + lambda(i))));
      z(i) = std::clamp(v, 1e-12, 1.0 - 1e-12);
    }
  }
  return z;
}

}  // namespace

const char* response_kind_name(ResponseKind kind) {
  switch (kind) {
    case ResponseKind::gaussian_severity:
      return "gaussian-severity";
    case ResponseKind::poisson_frequency:
      return "poisson-frequency";
    case ResponseKind::bernoulli_zero:
      return "bernoulli-zero";
    case ResponseKind::zip_frequency:
      return "zip-frequency";
  }
  return "unknown";
}

ResponseKind response_kind_from_name(const std::string& name) {
  if (name == "gaussian-severity") return ResponseKind::gaussian_severity;
  if (name == "poisson-frequency") return ResponseKind::poisson_frequency;
  if (name == "bernoulli-zero") return ResponseKind::bernoulli_zero;
  if (name == "zip-frequency") return ResponseKind::zip_frequency;
  throw input_error("unknown response kind: " + name);
}

std::vector<int> hard_assignment(const Eigen::MatrixXd& posteriors) {
  std::vector<int> h(static_cast<std::size_t>(posteriors.rows()));
  for (Eigen::Index i = 0; i < posteriors.rows(); ++i) {
    int best = 0;
    double bv = posteriors(i, 0);
    for (Eigen::Index k = 1; k < posteriors.cols(); ++k) {
      if (posteriors(i, k) > bv) {
        bv = posteriors(i, k);
        best = static_cast<int>(k);
      }
    }
    h[static_cast<std::size_t>(i)] = best;
  }
  return h;
}

int count_free_params(const GcwmModel& model) {
  int total = model.K - 1;
  for (const ComponentParams& c : model.components) {
    total += static_cast<int>(c.glm.coefficients.size());
    if (c.glm.has_dispersion) total += 1;
    if (c.gaussian) {
      int p = static_cast<int>(c.gaussian->mu.size());
      total += p + p * (p + 1) / 2;
    }
    if (c.lognormal) {
      int p = static_cast<int>(c.lognormal->log_scale.mu.size());
      total += p + p * (p + 1) / 2;
    }
    if (c.discrete) {
      for (const Eigen::VectorXd& g : c.discrete->gamma)
        total += static_cast<int>(g.size()) - 1;
    }
    if (c.zip) total += static_cast<int>(c.zip->beta_bar.size());
  }
  return total;
}

EstepResult estep(const Dataset& data, const GcwmModel& model) {
  if (model.components.empty())
    throw input_error("estep: model has no components");
  Designs dg = make_designs(data, model.response_kind, model.selections);
  EstepCore ec = estep_core(data, dg, model.response_kind, model.components);
  return {std::move(ec.post), ec.loglik};
}

std::vector<ComponentParams> mstep(const Dataset& data,
                                   const Eigen::MatrixXd& posteriors,
                                   ResponseKind kind,
                                   const Selections& selections) {
  Designs dg = make_designs(data, kind, selections);
  return mstep_core(data, dg, kind, posteriors, nullptr);
}

GcwmModel fit_gcwm(const Dataset& data, int K, ResponseKind kind,
                   const Selections& selections, const FitOptions& options) {
  if (kind == ResponseKind::zip_frequency)
    return fit_zigcwm(data, K, selections, options);
  if (K < 1) throw input_error("component count must be at least 1");
  const std::size_t n = data.n();
  Designs dg = make_designs(data, kind, selections);
  const Eigen::Index width = dg.X.cols();
  if (static_cast<double>(n) <
      5.0 * static_cast<double>(K) * static_cast<double>(width)) {
    std::ostringstream msg;
    msg << "refusing to fit " << K << " components with design width " << width
        << ": need at least " << 5 * K * width << " rows, have " << n;
    throw sizing_error(msg.str());
  }

  std::vector<Eigen::MatrixXd> starts;
  if (!options.user_labels.empty()) {
    if (options.user_labels.size() != n)
      throw input_error("user labels must cover every row");
    for (int lbl : options.user_labels)
      if (lbl < 0 || lbl >= K)
        throw input_error("user label out of range for the component count");
    starts.push_back(one_hot(options.user_labels, K));
  } else {
    for (int r = 0; r < options.random_starts; ++r)
      starts.push_back(random_hard_posteriors(
          n, K, derive_seed(options.seed, static_cast<std::uint64_t>(r))));
    if (options.distance_start)
      starts.push_back(
          distance_posteriors(data, K, derive_seed(options.seed, 1001)));
  }
  if (starts.empty()) throw input_error("no initialization strategy enabled");

  std::vector<StartOutcome> outcomes = run_starts(
      data, dg, kind, starts, options.stop, resolve_threads(options.threads));

  for (const StartOutcome& o : outcomes)
    if (o.fatal) std::rethrow_exception(o.fatal);

  int best = -1;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].run) continue;
    if (best < 0 ||
        outcomes[i].run->loglik > outcomes[static_cast<std::size_t>(best)].run->loglik)
      best = static_cast<int>(i);
  }
  if (best < 0) {
    std::string detail = outcomes.empty() ? "" : outcomes.front().failure;
    throw convergence_error("every initialization collapsed or failed" +
                            (detail.empty() ? "" : ": " + detail));
  }
  EmRun& run = *outcomes[static_cast<std::size_t>(best)].run;

  GcwmModel model;
  model.K = K;
  model.response_kind = kind;
  model.components = std::move(run.comps);
  model.posteriors = std::move(run.post);
  model.loglik_trace = std::move(run.trace);
  model.loglik = run.loglik;
  model.converged = run.converged;
  model.selections = selections;
  model.seed = options.seed;
  model.hard_labels = hard_assignment(model.posteriors);
  model.n_params = count_free_params(model);
  return model;
}

ZipFit fit_zip_cluster(const Dataset& data,
                       const Eigen::VectorXd& cluster_weights,
                       const std::vector<std::string>& poisson_selection,
                       const std::vector<std::string>& bernoulli_selection,
                       const Eigen::VectorXd& beta_init,
                       const Eigen::VectorXd& beta_bar_init) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  if (cluster_weights.size() != n)
    throw input_error("cluster weights must cover every row");
  if ((cluster_weights.array() < 0.0).any())
    throw input_error("cluster weights must be nonnegative");
  if (!(cluster_weights.sum() > 0.0))
    throw input_error("cluster weights sum to zero");

  Eigen::MatrixXd Xp = build_design(data, poisson_selection).X;
  Eigen::MatrixXd Xb = build_design(data, bernoulli_selection).X;
  const Eigen::VectorXd& y = data.response();
  const Eigen::VectorXd& o = data.log_exposure();
  const Eigen::VectorXd& w = cluster_weights;

  bool has_zero = false, has_pos = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) > 0.0) {
      if (y(i) == 0.0)
        has_zero = true;
      else
        has_pos = true;
    }
  }

  Eigen::VectorXd buf(n);
  ZipFit fit;

  if (!has_zero) {
    // Nothing to inflate: the fit reduces to a plain Poisson.
    fit.poisson_only = true;
    fit.poisson_fit = fit_poisson_weighted(Xp, y, w, o, beta_init);
    fit.beta = fit.poisson_fit.coefficients;
    fit.beta_bar = Eigen::VectorXd::Zero(Xb.cols());
    fit.beta_bar(0) = kPsiFloorIntercept;
    fit.bernoulli_fit.coefficients = fit.beta_bar;
    fit.bernoulli_fit.std_errors = Eigen::VectorXd::Zero(Xb.cols());
    fit.bernoulli_fit.converged = true;
    fit.bernoulli_fit.separation = true;
    fit.converged = fit.poisson_fit.converged;
    fit.zstar = zip_zstar(y, Xp, Xb, fit.beta, fit.beta_bar, o);
    fit.loglik =
        zip_weighted_loglik(y, Xp, Xb, fit.beta, fit.beta_bar, o, w, buf);
    fit.loglik_trace = {fit.loglik};
    return fit;
  }
  if (!has_pos) {
    // Structural zeros only: psi -> 1 and the Poisson rate is unidentified.
    fit.bernoulli_only = true;
    fit.beta = Eigen::VectorXd::Zero(Xp.cols());
    fit.beta(0) = kPsiFloorIntercept;
    fit.beta_bar = Eigen::VectorXd::Zero(Xb.cols());
    fit.beta_bar(0) = -kPsiFloorIntercept;
    fit.poisson_fit.coefficients = fit.beta;
    fit.poisson_fit.std_errors = Eigen::VectorXd::Zero(Xp.cols());
    fit.poisson_fit.converged = true;
    fit.bernoulli_fit.coefficients = fit.beta_bar;
    fit.bernoulli_fit.std_errors = Eigen::VectorXd::Zero(Xb.cols());
    fit.bernoulli_fit.converged = true;
    fit.bernoulli_fit.separation = true;
    fit.converged = true;
    fit.zstar = zip_zstar(y, Xp, Xb, fit.beta, fit.beta_bar, o);
    fit.loglik =
        zip_weighted_loglik(y, Xp, Xb, fit.beta, fit.beta_bar, o, w, buf);
    fit.loglik_trace = {fit.loglik};
    return fit;
  }

  Eigen::VectorXd beta =
      beta_init.size() == Xp.cols()
          ? beta_init
          : fit_poisson_weighted(Xp, y, w, o).coefficients;
  Eigen::VectorXd bbar = beta_bar_init.size() == Xb.cols()
                             ? beta_bar_init
                             : Eigen::VectorXd::Zero(Xb.cols()).eval();
  double ll = zip_weighted_loglik(y, Xp, Xb, beta, bbar, o, w, buf);
  if (!std::isfinite(ll)) {
    beta = fit_poisson_weighted(Xp, y, w, o).coefficients;
    bbar.setZero();
    ll = zip_weighted_loglik(y, Xp, Xb, beta, bbar, o, w, buf);
    if (!std::isfinite(ll))
      throw convergence_error(
          "zero-inflated initialization assigns zero likelihood");
  }
  fit.loglik_trace.push_back(ll);

  GlmFit pf, bf;
  Eigen::VectorXd zstar;
  for (int it = 0; it < kZipMaxIter; ++it) {
    zstar = zip_zstar(y, Xp, Xb, beta, bbar, o);
    Eigen::VectorXd pw = (1.0 - zstar.array()).matrix().cwiseProduct(w);
    pf = fit_poisson_weighted(Xp, y, pw, o, beta);
    bf = fit_bernoulli_weighted(Xb, zstar, w, bbar);
    beta = pf.coefficients;
    bbar = bf.coefficients;
    double ll_new = zip_weighted_loglik(y, Xp, Xb, beta, bbar, o, w, buf);
    fit.loglik_trace.push_back(ll_new);
    fit.iterations = it + 1;
    double change = ll_new - ll;
    ll = ll_new;
    if (change < kZipRelTol * (std::abs(ll_new) + 1.0)) {
      fit.converged = change > -1e-8;
      break;
    }
  }
  fit.beta = beta;
  fit.beta_bar = bbar;
  fit.zstar = zip_zstar(y, Xp, Xb, beta, bbar, o);
  fit.poisson_fit = pf;
  fit.bernoulli_fit = bf;
  fit.loglik = ll;
  return fit;
}

GcwmModel fit_zigcwm(const Dataset& data, int K, const Selections& selections,
                     const FitOptions& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  for (Eigen::Index i = 0; i < n; ++i) {
    double y = data.response()(i);
    if (y < 0.0 || y != std::floor(y))
      throw input_error(
          "zero-inflated fit requires a nonnegative integer response");
  }

  FitOptions po = options;
  po.seed = derive_seed(options.seed, 2001);
  FitOptions bo = options;
  bo.seed = derive_seed(options.seed, 2002);
  GcwmModel mp = fit_gcwm(data, K, ResponseKind::poisson_frequency, selections, po);
  GcwmModel mb = fit_gcwm(data, K, ResponseKind::bernoulli_zero, selections, bo);

  // Align the Bernoulli components onto the Poisson ones by their soft
  // co-assignment mass, then average the aligned posteriors.
  Eigen::MatrixXd overlap = mp.posteriors.transpose() * mb.posteriors;
  std::vector<int> perm = max_trace_permutation(overlap);
  Eigen::MatrixXd Pbar(n, K);
  for (int k = 0; k < K; ++k)
    Pbar.col(k) =
        0.5 * (mp.posteriors.col(k) + mb.posteriors.col(perm[static_cast<std::size_t>(k)]));
  std::vector<int> partition = hard_assignment(Pbar);

  Designs dg = make_designs(data, ResponseKind::zip_frequency, selections);

  GcwmModel model;
  model.K = K;
  model.response_kind = ResponseKind::zip_frequency;
  model.selections = selections;
  model.seed = options.seed;
  model.partition_labels = partition;
  model.zero_model_df = static_cast<int>(dg.Xb.cols());
  bool all_ok = mp.converged && mb.converged;

  Eigen::VectorXd buf(n);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd ind = Eigen::VectorXd::Zero(n);
    double nk = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (partition[static_cast<std::size_t>(i)] == k) {
        ind(i) = 1.0;
        nk += 1.0;
      }
    }
    if (nk == 0.0) {
      std::ostringstream msg;
      msg << "partitioning left component " << k << " empty";
      throw convergence_error(msg.str());
    }
    Eigen::VectorXd cw = ind.cwiseProduct(data.claim_weights());

    GlmFit pois = fit_poisson_weighted(
        dg.X, data.response(), cw, data.log_exposure(),
        mp.components[static_cast<std::size_t>(k)].glm.coefficients);
    ZipFit zf = fit_zip_cluster(
        data, cw, selections.response, selections.bernoulli,
        mp.components[static_cast<std::size_t>(k)].glm.coefficients,
        mb.components[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])]
            .glm.coefficients);
    if (zf.loglik < pois.loglik) {
      // The inner EM landed below the nested Poisson optimum; the psi -> 0
      // boundary fit dominates it, so adopt that instead.
      ZipFit alt;
      alt.beta = pois.coefficients;
      alt.beta_bar = Eigen::VectorXd::Zero(dg.Xb.cols());
      alt.beta_bar(0) = kPsiFloorIntercept;
      alt.loglik = zip_weighted_loglik(data.response(), dg.X, dg.Xb, alt.beta,
                                       alt.beta_bar, data.log_exposure(), cw,
                                       buf);
      if (alt.loglik > zf.loglik) {
        alt.poisson_fit = pois;
        alt.bernoulli_fit.coefficients = alt.beta_bar;
        alt.bernoulli_fit.std_errors = Eigen::VectorXd::Zero(dg.Xb.cols());
        alt.bernoulli_fit.converged = true;
        alt.bernoulli_fit.separation = true;
        alt.zstar = zip_zstar(data.response(), dg.X, dg.Xb, alt.beta,
                              alt.beta_bar, data.log_exposure());
        alt.converged = pois.converged;
        alt.loglik_trace = {alt.loglik};
        zf = std::move(alt);
      }
    }
    LrTestResult lr =
        zero_inflation_lr_test(pois.loglik, zf.loglik, model.zero_model_df);

    ComponentParams c;
    c.tau = nk / static_cast<double>(n);
    update_marginals(data, ind, nk, c);
    if (lr.reject) {
      c.glm = zf.poisson_fit;
      ZipConditional z;
      z.beta = zf.beta;
      z.beta_bar = zf.beta_bar;
      z.offset_log_exposure = true;
      c.zip = std::move(z);
      c.zip_bernoulli = zf.bernoulli_fit;
    } else {
      // No evidence of zero inflation: keep the plain Poisson conditional.
      c.glm = pois;
    }
    model.components.push_back(std::move(c));
    model.cluster_loglik_poisson.push_back(pois.loglik);
    model.cluster_loglik_zip.push_back(zf.loglik);
    model.cluster_poisson_fits.push_back(std::move(pois));
    all_ok = all_ok && zf.converged;
  }

  EstepCore ec = estep_core(data, dg, ResponseKind::zip_frequency,
                            model.components);
  model.posteriors = std::move(ec.post);
  model.loglik = ec.loglik;
  model.loglik_trace = {ec.loglik};
  model.converged = all_ok;
  model.hard_labels = hard_assignment(model.posteriors);
  model.n_params = count_free_params(model);
  return model;
}

GcwmModel strip_zero_inflation(const Dataset& data, const GcwmModel& model) {
  if (model.response_kind != ResponseKind::zip_frequency)
    throw input_error("strip_zero_inflation expects a zero-inflated model");
  if (model.cluster_poisson_fits.size() != model.components.size())
    throw input_error("model lacks per-cluster Poisson fits");
  GcwmModel out = model;
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    out.components[k].glm = model.cluster_poisson_fits[k];
    out.components[k].zip.reset();
    out.components[k].zip_bernoulli.reset();
  }
  Designs dg = make_designs(data, ResponseKind::zip_frequency, out.selections);
  EstepCore ec =
      estep_core(data, dg, ResponseKind::zip_frequency, out.components);
  out.posteriors = std::move(ec.post);
  out.loglik = ec.loglik;
  out.loglik_trace = {ec.loglik};
  out.hard_labels = hard_assignment(out.posteriors);
  out.n_params = count_free_params(out);
  return out;
}

}  // namespace gcwm
