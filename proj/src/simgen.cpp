#include "gcwm/simgen.hpp"

#include "gcwm/errors.hpp"
#include "gcwm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace gcwm {

using rng::Rng;
using rng::derive_seed;

namespace {

void validate_design(const SimDesign& d) {
  if (d.components.empty()) throw input_error("design has no components");
  if (d.n_per_component < 1)
    throw input_error("n-per-component must be at least 1");
  if (!(d.scale_factor > 0.0) || !std::isfinite(d.scale_factor))
    throw input_error("scale-factor must be positive and finite");
  if (!(d.noise_fraction >= 0.0))
    throw input_error("noise-fraction must be nonnegative");
  const auto& ref = d.components.front().covariates;
  const Eigen::Index width = static_cast<Eigen::Index>(ref.size()) + 1;
  for (std::size_t k = 0; k < d.components.size(); ++k) {
    const ComponentDesign& c = d.components[k];
    if (c.beta.size() != width)
      throw input_error("component coefficient width disagrees with the "
                        "covariate list");
    if (c.beta_bar.size() != 0 && c.beta_bar.size() != width)
      throw input_error("zero-model coefficient width disagrees with the "
                        "covariate list");
    if (c.covariates.size() != ref.size())
      throw input_error("components disagree on the covariate list");
    for (std::size_t j = 0; j < ref.size(); ++j) {
      const CovariateGen& g = c.covariates[j];
      if (g.name != ref[j].name || g.role != ref[j].role ||
          g.log_in_design != ref[j].log_in_design)
        throw input_error("components disagree on covariate '" + ref[j].name +
                          "'");
      if (g.role != Role::gaussian && g.role != Role::lognormal)
        throw input_error("covariate '" + g.name +
                          "' must be gaussian or lognormal");
      if (!(g.scale > 0.0))
        throw input_error("covariate '" + g.name + "' needs a positive scale");
    }
  }
  for (auto [k, j] : d.zeroed) {
    if (k < 0 || k >= static_cast<int>(d.components.size()) || j < 0 ||
        j >= static_cast<int>(width))
      throw input_error("zeroed coefficient index out of range");
  }
}

// Covariate draws and the matching design-row values for one observation.
void draw_covariates(Rng& r, const ComponentDesign& c, double* values,
                     double* design) {
  design[0] = 1.0;
  for (std::size_t j = 0; j < c.covariates.size(); ++j) {
    const CovariateGen& g = c.covariates[j];
    if (g.role == Role::gaussian) {
      values[j] = r.normal(g.location, g.scale);
      design[j + 1] = values[j];
    } else {
      double ln = r.normal(g.location, g.scale);
      values[j] = std::exp(ln);
      design[j + 1] = g.log_in_design ? ln : values[j];
    }
  }
}

// Assemble a Dataset from per-row covariate values laid out row-major.
Dataset assemble(const SimDesign& d, const Eigen::VectorXd& y,
                 const Eigen::MatrixXd& values) {
  const auto& covs = d.components.front().covariates;
  const Eigen::Index n = y.size();
  Eigen::Index ng = 0, nu = 0;
  for (const auto& g : covs) (g.role == Role::gaussian ? ng : nu)++;
  Eigen::MatrixXd G(n, ng), U(n, nu);
  std::vector<CovariateSpec> gspecs, uspecs;
  Eigen::Index ig = 0, iu = 0;
  for (std::size_t j = 0; j < covs.size(); ++j) {
    if (covs[j].role == Role::gaussian) {
      G.col(ig++) = values.col(static_cast<Eigen::Index>(j));
      gspecs.push_back({covs[j].name, Role::gaussian, {}});
    } else {
      U.col(iu++) = values.col(static_cast<Eigen::Index>(j));
      uspecs.push_back({covs[j].name, Role::lognormal, {}});
    }
  }
  return Dataset(y, Eigen::VectorXd(), Eigen::VectorXd(), std::move(G),
                 std::move(gspecs), std::move(U), std::move(uspecs), {}, {});
}

// Permutation aligning true classes (rows) to fitted labels (columns).
std::vector<int> align_labels(const std::vector<int>& truth,
                              const std::vector<int>& fitted, int K) {
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t i = 0; i < truth.size(); ++i)
    overlap(truth[i], fitted[i]) += 1.0;
  return max_trace_permutation(overlap);
}

bool run_fit(const std::function<GcwmModel()>& fit, GcwmModel& out) {
  try {
    out = fit();
    return true;
  } catch (const component_collapse&) {
  } catch (const convergence_error&) {
  } catch (const sizing_error&) {
  }
  return false;
}

}  // namespace

const char* zip_condition_name(ZipCondition c) {
  return c == ZipCondition::normal ? "normal" : "close";
}

ZipCondition zip_condition_from_name(const std::string& name) {
  if (name == "normal") return ZipCondition::normal;
  if (name == "close") return ZipCondition::close;
  throw input_error("unknown condition '" + name + "' (normal|close)");
}

SimDesign effective_design(const SimDesign& design) {
  validate_design(design);
  SimDesign d = design;
  for (auto& c : d.components) {
    c.beta *= d.scale_factor;
    if (c.beta_bar.size() > 0) c.beta_bar *= d.scale_factor;
  }
  for (auto [k, j] : d.zeroed) d.components[k].beta(j) = 0.0;
  d.scale_factor = 1.0;
  d.zeroed.clear();
  return d;
}

SimDesign with_close_means(const SimDesign& design) {
  validate_design(design);
  SimDesign d = design;
  const std::size_t K = d.components.size();
  for (std::size_t j = 0; j < d.components.front().covariates.size(); ++j) {
    double centroid = 0.0;
    for (const auto& c : d.components) centroid += c.covariates[j].location;
    centroid /= static_cast<double>(K);
    for (auto& c : d.components)
      c.covariates[j].location =
          centroid + 0.8 * (c.covariates[j].location - centroid);
  }
  return d;
}

std::vector<std::string> design_selection(const SimDesign& design) {
  std::vector<std::string> sel;
  for (const auto& g : design.components.front().covariates)
    sel.push_back(g.role == Role::lognormal && g.log_in_design
                      ? "log(" + g.name + ")"
                      : g.name);
  return sel;
}

SimDesign severity_study_design(double scale_factor) {
  SimDesign d;
  d.n_per_component = 500;
  d.scale_factor = scale_factor;
  d.noise_fraction = 0.05;
  d.zeroed = {{1, 1}};
  auto covs = [](double m1, double m2, double lm3) {
    return std::vector<CovariateGen>{
        {"x1", Role::gaussian, m1, 4.0, false},
        {"x2", Role::gaussian, m2, 2.0, false},
        {"x3", Role::lognormal, lm3, 0.5, false},
    };
  };
  auto vec4 = [](double a, double b, double c, double e) {
    Eigen::VectorXd v(4);
    v << a, b, c, e;
    return v;
  };
  d.components.resize(3);
  d.components[0] = {vec4(1028, 0.03, 3.5, -380), {}, covs(30, 10, 1.0)};
  d.components[1] = {vec4(1600, -0.01, 1.5, -250), {}, covs(45, 20, 2.0)};
  d.components[2] = {vec4(40000, -6.00, -305, 1100), {}, covs(60, 30, 3.0)};
  return d;
}

namespace {

std::vector<CovariateGen> zip_covs(double den, double den_sd, double age,
                                   double age_sd, double car, double car_sd) {
  return std::vector<CovariateGen>{
      {"den", Role::lognormal, den, den_sd, true},
      {"age", Role::gaussian, age, age_sd, false},
      {"car", Role::gaussian, car, car_sd, false},
  };
}

Eigen::VectorXd zip_vec4(double a, double b, double c, double e) {
  Eigen::VectorXd v(4);
  v << a, b, c, e;
  return v;
}

}  // namespace

SimDesign zip_study_design() {
  SimDesign d;
  d.n_per_component = 1000;
  d.components.resize(3);
  // Typical (lambda, psi): (0.55, 0.08), (1.90, 0.15), (0.80, 0.60) =>
  // mean counts 0.51 / 1.62 / 0.32 and zero rates 0.61 / 0.28 / 0.79.
  // Rates stay low so no count shape is bimodal (a count-only fit on such
  // data would otherwise carve clusters along the zero spike), inflation
  // is concentrated in the smallest-rate component, and counts separate
  // 1 from 2 far better than zeros do while zeros separate 1 from 3 where
  // mean counts nearly coincide.  The density covariate keeps the
  // reference log-scale locations 4.05 / 7.37 / 5.45; its third spread is
  // widened from the degenerate reference value so no component is
  // identifiable from one covariate alone.
  d.components[0] = {zip_vec4(-1.385, 0.15, 0.010, -0.02),
                     zip_vec4(-1.757, -0.10, -0.010, 0.01),
                     zip_covs(4.05, 0.87, 38, 7.0, 10.0, 4.0)};
  d.components[1] = {zip_vec4(-2.244, 0.30, 0.015, -0.03),
                     zip_vec4(-2.922, 0.10, 0.010, -0.02),
                     zip_covs(7.37, 1.24, 52, 7.0, 3.5, 4.0)};
  d.components[2] = {zip_vec4(-2.283, 0.20, 0.010, 0.02),
                     zip_vec4(-1.915, 0.10, 0.020, 0.03),
                     zip_covs(5.45, 0.35, 64, 7.0, 16.5, 4.0)};
  return d;
}

SimDesign zip_comparison_design() {
  SimDesign d;
  // Softer covariate overlap than the classification default: the method
  // comparison needs a regime where a meaningful share of rows is decided
  // by the count / zero channels rather than by the covariates, otherwise
  // all three partitioning routes coincide.  700 rows per component keeps
  // a 100-run-per-condition comparison inside its time budget on one core.
  d.n_per_component = 700;
  d.components.resize(3);
  // Same conditional family as zip_study_design: typical (lambda, psi) =
  // (0.55, 0.08), (1.90, 0.15), (0.80, 0.60).
  d.components[0] = {zip_vec4(-1.423, 0.15, 0.010, -0.02),
                     zip_vec4(-1.732, -0.10, -0.010, 0.01),
                     zip_covs(4.30, 0.80, 38, 7.0, 10.0, 4.0)};
  d.components[1] = {zip_vec4(-2.073, 0.30, 0.015, -0.03),
                     zip_vec4(-2.835, 0.10, 0.010, -0.02),
                     zip_covs(7.10, 0.80, 48, 7.0, 4.5, 4.0)};
  d.components[2] = {zip_vec4(-2.203, 0.20, 0.010, 0.02),
                     zip_vec4(-1.805, 0.10, 0.020, 0.03),
                     zip_covs(5.30, 0.80, 60, 7.0, 16.0, 4.0)};
  return d;
}

SimSample generate_gcwm_study(const SimDesign& design, std::uint64_t seed) {
  SimDesign eff = effective_design(design);
  const int K = static_cast<int>(eff.components.size());
  const int npc = eff.n_per_component;
  const Eigen::Index n = static_cast<Eigen::Index>(K) * npc;
  const std::size_t q = eff.components.front().covariates.size();

  Rng r(derive_seed(seed, 3001));
  Eigen::MatrixXd values(n, static_cast<Eigen::Index>(q));
  Eigen::VectorXd y(n), lp(n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<double> row_vals(q), row_design(q + 1);

  for (int k = 0; k < K; ++k) {
    const ComponentDesign& c = eff.components[k];
    const Eigen::Index base = static_cast<Eigen::Index>(k) * npc;
    for (int i = 0; i < npc; ++i) {
      draw_covariates(r, c, row_vals.data(), row_design.data());
      const Eigen::Index row = base + i;
      for (std::size_t j = 0; j < q; ++j)
        values(row, static_cast<Eigen::Index>(j)) = row_vals[j];
      double eta = 0.0;
      for (std::size_t j = 0; j <= q; ++j)
        eta += row_design[j] * c.beta(static_cast<Eigen::Index>(j));
      lp(row) = eta;
      labels[static_cast<std::size_t>(row)] = k;
    }
    // Noise scale from this component's realized predictor spread.
    auto seg = lp.segment(base, npc);
    double mean = seg.mean();
    double sd = npc > 1 ? std::sqrt((seg.array() - mean).square().sum() /
                                    (npc - 1))
                        : 0.0;
    if (!(sd > 0.0)) sd = std::abs(mean) + 1.0;
    double noise = eff.noise_fraction * sd;
    for (int i = 0; i < npc; ++i) y(base + i) = lp(base + i) + noise * r.normal();
  }
  return SimSample{assemble(eff, y, values), std::move(labels),
                   std::move(eff)};
}

SimSample generate_zip_study(const SimDesign& design, std::uint64_t seed,
                             ZipCondition condition) {
  SimDesign shaped =
      condition == ZipCondition::close ? with_close_means(design) : design;
  SimDesign eff = effective_design(shaped);
  const int K = static_cast<int>(eff.components.size());
  const int npc = eff.n_per_component;
  const Eigen::Index n = static_cast<Eigen::Index>(K) * npc;
  const std::size_t q = eff.components.front().covariates.size();

  Rng r(derive_seed(seed, 3002));
  Eigen::MatrixXd values(n, static_cast<Eigen::Index>(q));
  Eigen::VectorXd y(n);
  std::vector<int> labels(static_cast<std::size_t>(n));
  std::vector<double> row_vals(q), row_design(q + 1);

  for (int k = 0; k < K; ++k) {
    const ComponentDesign& c = eff.components[k];
    const Eigen::Index base = static_cast<Eigen::Index>(k) * npc;
    for (int i = 0; i < npc; ++i) {
      draw_covariates(r, c, row_vals.data(), row_design.data());
      const Eigen::Index row = base + i;
      for (std::size_t j = 0; j < q; ++j)
        values(row, static_cast<Eigen::Index>(j)) = row_vals[j];
      double eta_p = 0.0, eta_z = 0.0;
      for (std::size_t j = 0; j <= q; ++j) {
        eta_p += row_design[j] * c.beta(static_cast<Eigen::Index>(j));
        if (c.beta_bar.size() > 0)
          eta_z += row_design[j] * c.beta_bar(static_cast<Eigen::Index>(j));
      }
      double psi =
          c.beta_bar.size() > 0 ? 1.0 / (1.0 + std::exp(-eta_z)) : 0.0;
      int structural = psi > 0.0 ? r.bernoulli(psi) : 0;
      y(row) = structural ? 0.0 : r.poisson(std::exp(eta_p));
      labels[static_cast<std::size_t>(row)] = k;
    }
  }
  return SimSample{assemble(eff, y, values), std::move(labels),
                   std::move(eff)};
}

// ---------------------------------------------------------------------------
// Studies.

GcwmStudyReport run_gcwm_study(const SimDesign& design,
                               const StudyOptions& options) {
  if (options.n_runs < 1) throw input_error("runs must be at least 1");
  SimDesign eff = effective_design(design);
  const int K = static_cast<int>(eff.components.size());
  const int P = static_cast<int>(eff.components.front().beta.size());

  GcwmStudyReport rep;
  rep.runs = options.n_runs;
  auto blank = [&] {
    std::vector<std::vector<CoefficientCell>> cells(
        K, std::vector<CoefficientCell>(P));
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < P; ++j)
        cells[k][j].true_value = eff.components[k].beta(j);
    for (auto [k, j] : design.zeroed) cells[k][j].zeroed = true;
    return cells;
  };
  rep.gcwm = blank();
  rep.cwm = blank();
  std::vector<std::string> sel = design_selection(design);

  auto accumulate = [&](std::vector<std::vector<CoefficientCell>>& cells,
                        const GcwmModel& m, const std::vector<int>& truth) {
    std::vector<int> perm = align_labels(truth, m.hard_labels, K);
    for (int k = 0; k < K; ++k) {
      const GlmFit& fit = m.components[perm[k]].glm;
      for (int j = 0; j < P; ++j) {
        CoefficientCell& cell = cells[k][j];
        double est = fit.coefficients(j);
        double se = fit.std_errors(j);
        double err = est - cell.true_value;
        cell.mse += err * err;
        if (std::abs(err) <= 1.96 * se) cell.coverage += 1.0;
        cell.runs += 1;
      }
    }
  };

  for (int run = 0; run < options.n_runs; ++run) {
    std::uint64_t run_seed = derive_seed(options.seed, 4001 + run);
    SimSample s = generate_gcwm_study(design, run_seed);
    Selections selections;
    selections.response = sel;

    FitOptions fo = options.fit;
    fo.seed = derive_seed(run_seed, 11);
    GcwmModel gm, cm;
    bool gok = run_fit(
        [&] {
          return fit_gcwm(s.data, K, ResponseKind::gaussian_severity,
                          selections, fo);
        },
        gm);
    FitOptions fc = options.fit;
    fc.seed = derive_seed(run_seed, 12);
    Dataset cwm_data = s.data.with_lognormal_as_gaussian();
    bool cok = run_fit(
        [&] {
          return fit_gcwm(cwm_data, K, ResponseKind::gaussian_severity,
                          selections, fc);
        },
        cm);

    if (gok) {
      rep.gcwm_ok += 1;
      accumulate(rep.gcwm, gm, s.labels);
    }
    if (cok) {
      rep.cwm_ok += 1;
      accumulate(rep.cwm, cm, s.labels);
    }
    if (gok && cok) {
      rep.both_ok += 1;
      double bic_g = info_criteria(gm, s.data.n()).bic;
      double bic_c = info_criteria(cm, s.data.n()).bic;
      if (bic_g < bic_c) rep.gcwm_bic_wins += 1;
    }
  }

  auto finish = [](std::vector<std::vector<CoefficientCell>>& cells) {
    for (auto& row : cells)
      for (auto& cell : row)
        if (cell.runs > 0) {
          cell.coverage /= cell.runs;
          cell.mse /= cell.runs;
        }
  };
  finish(rep.gcwm);
  finish(rep.cwm);
  return rep;
}

ClassificationStudyReport run_zip_classification_study(
    const SimDesign& design, ZipCondition condition,
    const StudyOptions& options) {
  if (options.n_runs < 1) throw input_error("runs must be at least 1");
  const int K = static_cast<int>(design.components.size());
  std::vector<std::string> sel = design_selection(design);

  ClassificationStudyReport rep;
  rep.runs = options.n_runs;
  for (int run = 0; run < options.n_runs; ++run) {
    std::uint64_t run_seed = derive_seed(options.seed, 5001 + run);
    SimSample s = generate_zip_study(design, run_seed, condition);
    Selections selections;
    selections.response = sel;
    selections.bernoulli = sel;
    FitOptions fo = options.fit;
    fo.seed = derive_seed(run_seed, 13);
    GcwmModel m;
    if (!run_fit([&] { return fit_zigcwm(s.data, K, selections, fo); }, m)) {
      rep.failures += 1;
      continue;
    }
    ConfusionReport cr = confusion_report(s.labels, m.hard_labels);
    if (rep.misclassification.empty()) rep.first_confusion = cr.matrix;
    rep.misclassification.push_back(cr.misclassification);
    rep.purity.push_back(cr.purity);
    rep.ari.push_back(cr.ari);
  }
  return rep;
}

PartitionStudyReport run_partition_study(const SimDesign& design,
                                         ZipCondition condition,
                                         const StudyOptions& options) {
  if (options.n_runs < 1) throw input_error("runs must be at least 1");
  const int K = static_cast<int>(design.components.size());
  std::vector<std::string> sel = design_selection(design);

  PartitionStudyReport rep;
  rep.condition = condition;
  rep.runs = options.n_runs;
  rep.methods[0].method = "poisson";
  rep.methods[1].method = "bernoulli";
  rep.methods[2].method = "combined";

  std::uint64_t base = derive_seed(
      options.seed, condition == ZipCondition::close ? 6500 : 6000);
  for (int run = 0; run < options.n_runs; ++run) {
    std::uint64_t run_seed = derive_seed(base, run + 1);
    SimSample s = generate_zip_study(design, run_seed, condition);
    Selections selections;
    selections.response = sel;
    selections.bernoulli = sel;

    auto score = [&](int method, const std::function<std::vector<int>()>& go) {
      PartitionMethodStats& st = rep.methods[method];
      try {
        std::vector<int> labels = go();
        ConfusionReport cr = confusion_report(s.labels, labels);
        st.misclassification.push_back(cr.misclassification);
        st.purity.push_back(cr.purity);
        st.ari.push_back(cr.ari);
      } catch (const component_collapse&) {
        st.failures += 1;
      } catch (const convergence_error&) {
        st.failures += 1;
      } catch (const sizing_error&) {
        st.failures += 1;
      }
    };

    FitOptions fp = options.fit;
    fp.seed = derive_seed(run_seed, 21);
    score(0, [&] {
      return fit_gcwm(s.data, K, ResponseKind::poisson_frequency, selections,
                      fp)
          .hard_labels;
    });
    FitOptions fb = options.fit;
    fb.seed = derive_seed(run_seed, 22);
    score(1, [&] {
      return fit_gcwm(s.data, K, ResponseKind::bernoulli_zero, selections, fb)
          .hard_labels;
    });
    FitOptions fz = options.fit;
    fz.seed = derive_seed(run_seed, 23);
    score(2,
          [&] { return fit_zigcwm(s.data, K, selections, fz).partition_labels; });
  }
  return rep;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double median_of(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

// ---------------------------------------------------------------------------
// Study configuration parsing.

namespace {

double parse_double(const std::string& tok, const std::string& key) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw input_error("bad numeric value '" + tok + "' for " + key);
  }
}

long long parse_int(const std::string& tok, const std::string& key) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw input_error("bad integer value '" + tok + "' for " + key);
  }
}

int covariate_index(const SimDesign& d, const std::string& name) {
  if (name == "intercept") return 0;
  const auto& covs = d.components.front().covariates;
  for (std::size_t j = 0; j < covs.size(); ++j)
    if (covs[j].name == name) return static_cast<int>(j) + 1;
  throw input_error("unknown covariate '" + name + "' in study config");
}

}  // namespace

StudyConfig parse_study_config(std::istream& in) {
  std::vector<std::vector<std::string>> lines;
  std::string raw;
  while (std::getline(in, raw)) {
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (!toks.empty()) lines.push_back(std::move(toks));
  }

  StudyConfig cfg;
  for (const auto& toks : lines)
    if (toks[0] == "study") {
      if (toks.size() != 2) throw input_error("study takes one value");
      cfg.study = toks[1];
    }
  if (cfg.study == "severity-accuracy") {
    cfg.design = severity_study_design();
  } else if (cfg.study == "zip-classification") {
    cfg.design = zip_study_design();
  } else if (cfg.study == "partition-comparison") {
    cfg.design = zip_comparison_design();
  } else if (cfg.study.empty()) {
    throw input_error("study config must name a study");
  } else {
    throw input_error("unknown study '" + cfg.study +
                      "' (severity-accuracy|zip-classification|"
                      "partition-comparison)");
  }
  const bool zip_study = cfg.study != "severity-accuracy";
  bool zero_cleared = false;

  for (const auto& toks : lines) {
    const std::string& key = toks[0];
    auto want = [&](std::size_t n) {
      if (toks.size() != n)
        throw input_error("config key '" + key + "' takes " +
                          std::to_string(n - 1) + " value(s)");
    };
    if (key == "study") {
      continue;
    } else if (key == "runs") {
      want(2);
      long long v = parse_int(toks[1], key);
      if (v < 1) throw input_error("runs must be at least 1");
      cfg.options.n_runs = static_cast<int>(v);
    } else if (key == "seed") {
      want(2);
      try {
        cfg.options.seed = std::stoull(toks[1]);
      } catch (const std::exception&) {
        throw input_error("bad seed '" + toks[1] + "'");
      }
    } else if (key == "condition") {
      want(2);
      if (!zip_study)
        throw input_error("condition only applies to the zip studies");
      if (toks[1] == "both") {
        cfg.run_normal = cfg.run_close = true;
      } else {
        ZipCondition c = zip_condition_from_name(toks[1]);
        cfg.run_normal = c == ZipCondition::normal;
        cfg.run_close = c == ZipCondition::close;
      }
    } else if (key == "scale-factor") {
      want(2);
      cfg.design.scale_factor = parse_double(toks[1], key);
    } else if (key == "n-per-component") {
      want(2);
      cfg.design.n_per_component =
          static_cast<int>(parse_int(toks[1], key));
    } else if (key == "noise-fraction") {
      want(2);
      cfg.design.noise_fraction = parse_double(toks[1], key);
    } else if (key == "restarts") {
      want(2);
      long long v = parse_int(toks[1], key);
      if (v < 0) throw input_error("restarts must be nonnegative");
      cfg.options.fit.random_starts = static_cast<int>(v);
    } else if (key == "threads") {
      want(2);
      cfg.options.fit.threads = static_cast<int>(parse_int(toks[1], key));
    } else if (key == "zero-coefficient") {
      if (!zero_cleared) {
        cfg.design.zeroed.clear();
        zero_cleared = true;
      }
      if (toks.size() == 2 && toks[1] == "none") continue;
      want(3);
      int comp = static_cast<int>(parse_int(toks[1], key)) - 1;
      if (comp < 0 || comp >= static_cast<int>(cfg.design.components.size()))
        throw input_error("zero-coefficient component out of range");
      cfg.design.zeroed.emplace_back(comp,
                                     covariate_index(cfg.design, toks[2]));
    } else if (key == "component") {
      if (toks.size() < 3) throw input_error("malformed component line");
      int comp = static_cast<int>(parse_int(toks[1], key)) - 1;
      if (comp < 0 || comp >= static_cast<int>(cfg.design.components.size()))
        throw input_error("component index out of range");
      ComponentDesign& c = cfg.design.components[comp];
      const std::string& what = toks[2];
      if (what == "beta" || what == "beta-bar") {
        if (what == "beta-bar" && toks.size() == 4 && toks[3] == "none") {
          c.beta_bar.resize(0);
          continue;
        }
        Eigen::VectorXd v(static_cast<Eigen::Index>(toks.size()) - 3);
        for (std::size_t j = 3; j < toks.size(); ++j)
          v(static_cast<Eigen::Index>(j - 3)) = parse_double(toks[j], what);
        (what == "beta" ? c.beta : c.beta_bar) = std::move(v);
      } else if (what == "covariate") {
        if (toks.size() != 7)
          throw input_error(
              "component covariate lines take: name kind location scale");
        int idx = covariate_index(cfg.design, toks[3]) - 1;
        if (idx < 0) throw input_error("cannot redefine the intercept");
        CovariateGen& g = c.covariates[static_cast<std::size_t>(idx)];
        if (toks[4] == "gaussian") {
          g.role = Role::gaussian;
          g.log_in_design = false;
        } else if (toks[4] == "lognormal") {
          g.role = Role::lognormal;
          g.log_in_design = false;
        } else if (toks[4] == "log-design") {
          g.role = Role::lognormal;
          g.log_in_design = true;
        } else {
          throw input_error("unknown covariate kind '" + toks[4] + "'");
        }
        g.location = parse_double(toks[5], "covariate location");
        g.scale = parse_double(toks[6], "covariate scale");
      } else {
        throw input_error("unknown component attribute '" + what + "'");
      }
    } else {
      throw input_error("unknown study config key '" + key + "'");
    }
  }

  validate_design(cfg.design);
  return cfg;
}

StudyConfig parse_study_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open study config: " + path);
  return parse_study_config(in);
}

}  // namespace gcwm
