#pragma once

#include "gcwm/data.hpp"
#include "gcwm/em.hpp"
#include "gcwm/selection.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace gcwm {

// One scalar covariate sampler inside a component.
struct CovariateGen {
  std::string name;
  Role role = Role::gaussian;  // gaussian or lognormal
  double location = 0.0;       // mean (gaussian) / log-mean (lognormal)
  double scale = 1.0;          // sd (gaussian) / log-sd (lognormal)
  // Log-normal only: the regression design uses ln(value) instead of the
  // raw value. The marginal block models the raw value either way.
  bool log_in_design = false;
};

struct ComponentDesign {
  Eigen::VectorXd beta;      // response coefficients, intercept first
  Eigen::VectorXd beta_bar;  // zero-model coefficients; empty = no zeros
  std::vector<CovariateGen> covariates;
};

// Every component must declare the same covariate list (names, roles,
// design transforms); locations/scales differ per component.
struct SimDesign {
  std::vector<ComponentDesign> components;
  int n_per_component = 1000;
  double scale_factor = 1.0;  // multiplies every beta / beta_bar entry
  // (component, coefficient) pairs forced to zero after scaling;
  // coefficient index 0 is the intercept.
  std::vector<std::pair<int, int>> zeroed;
  // Gaussian response noise sd as a fraction of the within-component
  // linear-predictor sd.
  double noise_fraction = 0.05;
};

enum class ZipCondition { normal, close };

const char* zip_condition_name(ZipCondition c);
ZipCondition zip_condition_from_name(const std::string& name);

struct SimSample {
  Dataset data;
  std::vector<int> labels;  // generating component per row
  SimDesign truth;          // exact parameters generation used
};

// The design with scale_factor applied and zeroed coefficients forced to
// zero: the exact parameters generation draws from.
SimDesign effective_design(const SimDesign& design);

// Every covariate's component locations pulled 20% toward their
// cross-component centroid, so all pairwise location distances shrink to
// 80% of the originals.
SimDesign with_close_means(const SimDesign& design);

// Selections matching the design's covariate transforms (bare name, or
// log(name) for log-in-design log-normal covariates).
std::vector<std::string> design_selection(const SimDesign& design);

// Canonical three-component severity design: Gaussian response on two
// Gaussian covariates and one log-normal covariate entering the
// regression untransformed. Baseline coefficients per component:
// (1028, 0.03, 3.5, -380), (1600, -0.01, 1.5, -250),
// (40000, -6.00, -305, 1100); scaled variants use factors
// 1.3 / 0.7 / 1.5 / 0.5. By default the second component's first-slot
// coefficient is zeroed.
SimDesign severity_study_design(double scale_factor = 1.0);

// Canonical three-component zero-inflated count design: log-normal
// "den" covariate (log-scale locations 4.05 / 7.37 / 5.45 with sds
// 0.87 / 1.24 / 0.35) entering both designs as ln(den), plus Gaussian
// "age" and "car". Count and zero coefficients are documented defaults
// calibrated for a baseline misclassification around 1-3%.
SimDesign zip_study_design();

// Variant of zip_study_design used by the partitioning-method comparison:
// covariate marginals overlap more, so enough rows are decided by the
// count and zero channels for the three partitioning routes to differ
// measurably; fewer rows per component keep many-run comparisons fast.
SimDesign zip_comparison_design();

// Gaussian-response sample: covariates per component, response =
// linear predictor + Gaussian noise. Same (design, seed) => identical
// sample.
SimSample generate_gcwm_study(const SimDesign& design, std::uint64_t seed);

// Zero-inflated count sample: structural zeros from Bernoulli(psi),
// counts from Poisson(lambda) otherwise. The close condition reshapes
// the design via with_close_means before drawing.
SimSample generate_zip_study(const SimDesign& design, std::uint64_t seed,
                             ZipCondition condition);

// ---------------------------------------------------------------------------
// Study harnesses.

struct StudyOptions {
  int n_runs = 1;
  std::uint64_t seed = 0;
  FitOptions fit;  // restart schedule etc. for every inner fit
};

struct CoefficientCell {
  double true_value = 0.0;
  double coverage = 0.0;  // fraction of runs with truth inside the 95% CI
  double mse = 0.0;       // mean squared estimation error across runs
  int runs = 0;           // successful runs feeding this cell
  bool zeroed = false;
};

// Per-run paired fit of the model (log-normal marginal) and its
// all-Gaussian baseline on the same generated severity data.
struct GcwmStudyReport {
  std::vector<std::vector<CoefficientCell>> gcwm;  // [component][coefficient]
  std::vector<std::vector<CoefficientCell>> cwm;
  int runs = 0;
  int gcwm_ok = 0;
  int cwm_ok = 0;
  int both_ok = 0;
  int gcwm_bic_wins = 0;  // BIC(model) < BIC(baseline) among both_ok runs
};

struct ClassificationStudyReport {
  std::vector<double> misclassification;  // per successful run
  std::vector<double> purity;
  std::vector<double> ari;
  Eigen::MatrixXi first_confusion;  // aligned confusion table of run 0
  int runs = 0;
  int failures = 0;
};

struct PartitionMethodStats {
  std::string method;
  std::vector<double> misclassification;
  std::vector<double> purity;
  std::vector<double> ari;
  int failures = 0;
};

struct PartitionStudyReport {
  // 0 = count-only partition, 1 = zero-only partition, 2 = combined.
  std::array<PartitionMethodStats, 3> methods;
  ZipCondition condition = ZipCondition::normal;
  int runs = 0;
};

GcwmStudyReport run_gcwm_study(const SimDesign& design,
                               const StudyOptions& options);

ClassificationStudyReport run_zip_classification_study(
    const SimDesign& design, ZipCondition condition,
    const StudyOptions& options);

PartitionStudyReport run_partition_study(const SimDesign& design,
                                         ZipCondition condition,
                                         const StudyOptions& options);

double mean_of(const std::vector<double>& xs);
double sd_of(const std::vector<double>& xs);    // sample sd (n - 1)
double median_of(std::vector<double> xs);

// ---------------------------------------------------------------------------
// Study configuration document: line-oriented "key value..." text.
//
//   study severity-accuracy | zip-classification | partition-comparison
//   runs <n>
//   seed <u64>
//   condition normal | close | both
//   scale-factor <x>
//   n-per-component <n>
//   noise-fraction <x>
//   restarts <n>
//   threads <n>
//   zero-coefficient <component 1-based> <covariate name | intercept>
//   component <k 1-based> beta <v0 v1 ...>
//   component <k 1-based> beta-bar <v0 v1 ...>
//   component <k 1-based> covariate <name> gaussian|lognormal|log-design <location> <scale>
//
// Component lines override the canonical design for the chosen study;
// unset pieces keep their defaults. '#' starts a comment.
struct StudyConfig {
  std::string study;
  SimDesign design;
  bool run_normal = true;
  bool run_close = false;
  StudyOptions options;
};

StudyConfig parse_study_config(std::istream& in);
StudyConfig parse_study_config_file(const std::string& path);

}  // namespace gcwm
