// Batch front-end: fit mixture models, classify rows, run the
// zero-inflation likelihood-ratio test, and run simulation studies.
// Exit codes: 0 success, 2 input error, 3 convergence failure,
// 4 sizing refusal. GCWM_THREADS caps worker threads for every fit.
#include "gcwm/data.hpp"
#include "gcwm/em.hpp"
#include "gcwm/errors.hpp"
#include "gcwm/model_io.hpp"
#include "gcwm/selection.hpp"
#include "gcwm/simgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gcwm;

namespace {

constexpr const char* kEngineVersion = "gcwm/0.1.0";
constexpr const char* kManifestName = "manifest.jsonl";

long elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// One JSON line per command invocation, appended next to the primary
// output; every delimited output file names this manifest in its header.
void append_manifest(const fs::path& dir, const std::string& command,
                     const std::string& config, std::uint64_t seed,
                     const std::vector<std::string>& inputs,
                     const std::vector<std::string>& outputs, long wall_ms) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["engine_version"] = kEngineVersion;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = seed;
  j["wall_ms"] = wall_ms;
  std::ofstream out(dir / kManifestName, std::ios::app);
  if (!out)
    throw input_error("cannot append manifest in: " + dir.string());
  out << j.dump() << '\n';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write: " + path.string());
  out << "# manifest: " << kManifestName << '\n';
  return out;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  std::string data_path, schema_path, kind = "gcwm", out_path;
  std::string select_response, select_bernoulli;
  std::string exposure_col, weights_col, k_range;
  int k = 0;
  std::uint64_t seed = 0;
  int restarts = 10;
};

std::vector<int> parse_k_values(const FitArgs& a) {
  std::vector<int> ks;
  if (a.k > 0 && !a.k_range.empty())
    throw input_error("pass either --k or --k-range, not both");
  if (a.k_range.empty()) {
    if (a.k < 1)
      throw input_error("--k: component count must be >= 1 (got " +
                        std::to_string(a.k) + ")");
    ks.push_back(a.k);
    return ks;
  }
  auto colon = a.k_range.find(':');
  if (colon == std::string::npos)
    throw input_error("--k-range: expected low:high, got '" + a.k_range + "'");
  int lo = 0, hi = 0;
  try {
    lo = std::stoi(a.k_range.substr(0, colon));
    hi = std::stoi(a.k_range.substr(colon + 1));
  } catch (const std::exception&) {
    throw input_error("--k-range: expected low:high, got '" + a.k_range + "'");
  }
  if (lo < 1 || hi < 1)
    throw input_error("--k-range: component counts must be >= 1 (got " +
                      a.k_range + ")");
  if (hi < lo) throw input_error("--k-range: high end below low end");
  for (int k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

std::vector<std::string> all_covariates(const Dataset& data) {
  std::vector<std::string> names;
  for (const auto& s : data.gaussian_specs()) names.push_back(s.name);
  for (const auto& s : data.lognormal_specs()) names.push_back(s.name);
  for (const auto& s : data.discrete_specs()) names.push_back(s.name);
  return names;
}

void print_selection_table(const SelectionTable& table) {
  std::printf("%4s %14s %8s %14s %14s\n", "K", "loglik", "params", "AIC",
              "BIC");
  for (const auto& r : table.rows) {
    if (r.criteria) {
      std::printf("%4d %14.3f %8d %14.3f %14.3f%s\n", r.K,
                  r.criteria->loglik, r.criteria->n_params, r.criteria->aic,
                  r.criteria->bic, r.K == table.best_K ? "  <- selected" : "");
    } else {
      std::printf("%4d   failed: %s\n", r.K, r.failure.c_str());
    }
  }
}

void write_selection_table(const fs::path& path, const SelectionTable& table) {
  std::ofstream out = open_output(path);
  out << "K\tloglik\tn_params\taic\tbic\tselected\tfailure\n";
  for (const auto& r : table.rows) {
    out << r.K << '\t';
    if (r.criteria) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%.6f\t%d\t%.6f\t%.6f\t%d\t",
                    r.criteria->loglik, r.criteria->n_params, r.criteria->aic,
                    r.criteria->bic, r.K == table.best_K ? 1 : 0);
      out << buf << '\n';
    } else {
      out << "\t\t\t\t0\t" << r.failure << '\n';
    }
  }
}

int cmd_fit(const FitArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  Schema schema = Schema::parse_file(a.schema_path);
  if (!a.exposure_col.empty()) schema.exposure = a.exposure_col;
  if (!a.weights_col.empty()) schema.weights = a.weights_col;
  Dataset data = load_csv(a.data_path, schema);
  if (a.kind == "cwm") data = data.with_lognormal_as_gaussian();

  const ResponseKind kind = a.kind == "zi-gcwm"
                                ? ResponseKind::zip_frequency
                                : ResponseKind::gaussian_severity;
  Selections sel;
  sel.response = a.select_response.empty() ? all_covariates(data)
                                           : split_list(a.select_response);
  sel.bernoulli = a.select_bernoulli.empty()
                      ? sel.response
                      : split_list(a.select_bernoulli);

  FitOptions options;
  options.seed = a.seed;
  options.random_starts = a.restarts;

  auto [model, table] = select_k(data, parse_k_values(a), kind, sel, options);
  print_selection_table(table);

  const fs::path out_path(a.out_path);
  const fs::path dir =
      out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  save_model(a.out_path, model, &table);
  fs::path stem = out_path;
  stem.replace_extension();
  const fs::path table_path = stem.string() + ".selection.tsv";
  write_selection_table(table_path, table);
  std::vector<std::string> outputs{out_path.string(), table_path.string()};

  // The zero-inflated fit also emits its all-Poisson twin on the same
  // frozen partition, so the LR-test workflow has its null document.
  if (kind == ResponseKind::zip_frequency) {
    const fs::path null_path = stem.string() + ".null.json";
    save_model(null_path.string(), strip_zero_inflation(data, model), &table);
    outputs.push_back(null_path.string());
  }
  append_manifest(dir, "fit", "", a.seed, {a.data_path, a.schema_path},
                  outputs, elapsed_ms(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyArgs {
  std::string model_path, data_path, schema_path, out_prefix;
};

// The model stores its covariate blocks by role; a model fit with every
// continuous covariate treated as Gaussian classifies raw data after the
// same re-roling. Any other shape difference is a schema mismatch.
Dataset align_to_model(Dataset data, const GcwmModel& model) {
  if (model.components.empty())
    throw input_error("model document has no components");
  const auto& c = model.components.front();
  const Eigen::Index mg = c.gaussian ? c.gaussian->mu.size() : 0;
  const Eigen::Index ml = c.lognormal ? c.lognormal->log_scale.mu.size() : 0;
  const Eigen::Index md =
      c.discrete ? static_cast<Eigen::Index>(c.discrete->gamma.size()) : 0;
  if (md != static_cast<Eigen::Index>(data.n_discrete()))
    throw input_error("model/schema mismatch: discrete covariate count");
  if (mg == data.p_gaussian() + data.p_lognormal() && ml == 0 &&
      data.p_lognormal() > 0)
    data = data.with_lognormal_as_gaussian();
  if (mg != data.p_gaussian() || ml != data.p_lognormal())
    throw input_error(
        "model/schema mismatch: continuous covariate blocks differ");
  return data;
}

int cmd_classify(const ClassifyArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  GcwmModel model = load_model(a.model_path);
  Schema schema = Schema::parse_file(a.schema_path);
  Dataset data = align_to_model(load_csv(a.data_path, schema), model);

  EstepResult e = estep(data, model);
  const Eigen::Index n = e.posteriors.rows();
  const int K = model.K;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j;
    e.posteriors.row(i).maxCoeff(&j);  // first maximum: lowest-index ties
    labels[static_cast<std::size_t>(i)] = static_cast<int>(j);
  }

  const fs::path prefix(a.out_prefix);
  const fs::path dir =
      prefix.has_parent_path() ? prefix.parent_path() : fs::path(".");
  fs::create_directories(dir);

  const fs::path labels_path = prefix.string() + ".labels.csv";
  {
    std::ofstream out = open_output(labels_path);
    out << "row,id,label\n";
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t idx = static_cast<std::size_t>(i);
      out << (i + 1) << ','
          << (data.ids().empty() ? std::string() : data.ids()[idx]) << ','
          << (labels[idx] + 1) << '\n';
    }
  }
  const fs::path post_path = prefix.string() + ".posteriors.csv";
  {
    std::ofstream out = open_output(post_path);
    out << "row";
    for (int k = 1; k <= K; ++k) out << ",p" << k;
    out << '\n';
    char buf[32];
    for (Eigen::Index i = 0; i < n; ++i) {
      out << (i + 1);
      for (int k = 0; k < K; ++k) {
        std::snprintf(buf, sizeof buf, "%.10f", e.posteriors(i, k));
        out << ',' << buf;
      }
      out << '\n';
    }
  }

  // Cluster sizes and per-cluster response spread, on stdout and on disk.
  std::vector<long> sizes(static_cast<std::size_t>(K), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  const fs::path clusters_path = prefix.string() + ".clusters.txt";
  std::ofstream cl = open_output(clusters_path);
  auto emit = [&](const char* fmt, auto... args) {
    std::printf(fmt, args...);
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    cl << buf;
  };
  emit("%8s %10s %10s\n", "cluster", "size", "share");
  for (int k = 0; k < K; ++k)
    emit("%8d %10ld %10.4f\n", k + 1, sizes[static_cast<std::size_t>(k)],
         static_cast<double>(sizes[static_cast<std::size_t>(k)]) /
             static_cast<double>(n));
  emit("%8s %12s %12s %12s %12s\n", "cluster", "min", "mean", "max", "sd");
  for (int k = 0; k < K; ++k) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -mn, sum = 0.0, sum2 = 0.0;
    long cnt = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (labels[static_cast<std::size_t>(i)] != k) continue;
      const double y = data.response()(i);
      mn = std::min(mn, y);
      mx = std::max(mx, y);
      sum += y;
      sum2 += y * y;
      ++cnt;
    }
    if (cnt == 0) {
      emit("%8d %12s %12s %12s %12s\n", k + 1, "-", "-", "-", "-");
      continue;
    }
    const double mean = sum / static_cast<double>(cnt);
    const double var =
        cnt > 1 ? (sum2 - sum * mean) / static_cast<double>(cnt - 1) : 0.0;
    emit("%8d %12.4f %12.4f %12.4f %12.4f\n", k + 1, mn, mean, mx,
         std::sqrt(std::max(var, 0.0)));
  }

  append_manifest(dir, "classify", "", model.seed,
                  {a.model_path, a.data_path, a.schema_path},
                  {labels_path.string(), post_path.string(),
                   clusters_path.string()},
                  elapsed_ms(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// lrtest

struct LrTestArgs {
  std::string null_path, alt_path, out_path;
  bool per_cluster = false;
};

// A document's response-conditional log-likelihood on cluster k, under
// whichever conditional that document kept for the cluster.
double cluster_model_loglik(const GcwmModel& m, int k) {
  const std::size_t idx = static_cast<std::size_t>(k);
  return m.components[idx].zip ? m.cluster_loglik_zip[idx]
                               : m.cluster_loglik_poisson[idx];
}

int cmd_lrtest(const LrTestArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  GcwmModel null_m = load_model(a.null_path);
  GcwmModel alt_m = load_model(a.alt_path);
  if (null_m.partition_labels.empty() || alt_m.partition_labels.empty())
    throw input_error("both model documents must carry a frozen partition");
  if (null_m.K != alt_m.K)
    throw input_error("model documents disagree on the component count");
  if (null_m.partition_labels != alt_m.partition_labels)
    throw input_error("model documents were fit on different partitions");
  const int m = alt_m.zero_model_df > 0 ? alt_m.zero_model_df
                                        : null_m.zero_model_df;
  if (m < 1)
    throw input_error("model documents lack a zero-model design width");

  std::vector<LrTestResult> rows;
  double sum_null = 0.0, sum_alt = 0.0;
  for (int k = 0; k < alt_m.K; ++k) {
    const double ll0 = cluster_model_loglik(null_m, k);
    const double ll1 = cluster_model_loglik(alt_m, k);
    sum_null += ll0;
    sum_alt += ll1;
    rows.push_back(zero_inflation_lr_test(ll0, ll1, m));
  }
  // The pooled row tests every cluster's zero model at once.
  const LrTestResult pooled =
      zero_inflation_lr_test(sum_null, sum_alt, m * alt_m.K);

  auto print_row = [](std::FILE* f, const std::string& name,
                      const LrTestResult& r) {
    std::fprintf(f, "%8s %14.4f %4d %12.4f %10s\n", name.c_str(), r.phi, r.m,
                 r.critical_95, r.reject ? "reject" : "retain");
  };
  std::printf("%8s %14s %4s %12s %10s\n", "cluster", "phi", "m",
              "critical_95", "decision");
  if (a.per_cluster)
    for (int k = 0; k < alt_m.K; ++k)
      print_row(stdout, std::to_string(k + 1), rows[static_cast<std::size_t>(k)]);
  print_row(stdout, "pooled", pooled);

  if (!a.out_path.empty()) {
    const fs::path out_path(a.out_path);
    const fs::path dir =
        out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    std::ofstream out = open_output(out_path);
    out << "cluster\tphi\tm\tcritical_95\tdecision\n";
    char buf[128];
    auto emit_row = [&](const std::string& name, const LrTestResult& r) {
      std::snprintf(buf, sizeof buf, "%s\t%.6f\t%d\t%.6f\t%s\n", name.c_str(),
                    r.phi, r.m, r.critical_95, r.reject ? "reject" : "retain");
      out << buf;
    };
    if (a.per_cluster)
      for (int k = 0; k < alt_m.K; ++k)
        emit_row(std::to_string(k + 1), rows[static_cast<std::size_t>(k)]);
    emit_row("pooled", pooled);
    append_manifest(dir, "lrtest", "", alt_m.seed,
                    {a.null_path, a.alt_path}, {out_path.string()},
                    elapsed_ms(t0));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config_path, out_dir, condition;
  int runs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

// Long-format sample of the first study draw, for external plotting: one
// line per (row, variable) with the generating component attached.
void write_sample_long(const fs::path& path, const SimSample& s) {
  std::ofstream out = open_output(path);
  out << "row\tcomponent\tvariable\tvalue\n";
  char buf[64];
  auto emit = [&](Eigen::Index i, const std::string& var, double v) {
    std::snprintf(buf, sizeof buf, "%.8g", v);
    out << (i + 1) << '\t' << s.labels[static_cast<std::size_t>(i)] + 1
        << '\t' << var << '\t' << buf << '\n';
  };
  const Eigen::Index n = static_cast<Eigen::Index>(s.data.n());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < s.data.p_gaussian(); ++j)
      emit(i, s.data.gaussian_specs()[static_cast<std::size_t>(j)].name,
           s.data.gaussian()(i, j));
    for (Eigen::Index j = 0; j < s.data.p_lognormal(); ++j)
      emit(i, s.data.lognormal_specs()[static_cast<std::size_t>(j)].name,
           s.data.lognormal()(i, j));
    emit(i, "response", s.data.response()(i));
  }
}

void simulate_severity(const StudyConfig& cfg, const fs::path& dir,
                       std::vector<std::string>& outputs) {
  const GcwmStudyReport rep = run_gcwm_study(cfg.design, cfg.options);
  const fs::path table_path = dir / "accuracy.tsv";
  std::ofstream out = open_output(table_path);
  out << "# study: severity-accuracy\truns: " << rep.runs
      << "\tgcwm_ok: " << rep.gcwm_ok << "\tcwm_ok: " << rep.cwm_ok
      << "\tboth_ok: " << rep.both_ok
      << "\tgcwm_bic_wins: " << rep.gcwm_bic_wins << '\n';
  out << "model\tcomponent\tcoefficient\ttrue_value\tzeroed\tcoverage\tmse\t"
         "runs\n";
  std::vector<std::string> coef_names{"(intercept)"};
  for (const auto& name : design_selection(cfg.design))
    coef_names.push_back(name);
  char buf[192];
  auto emit_block =
      [&](const char* model,
          const std::vector<std::vector<CoefficientCell>>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k)
          for (std::size_t j = 0; j < cells[k].size(); ++j) {
            const CoefficientCell& c = cells[k][j];
            std::snprintf(buf, sizeof buf,
                          "%s\t%zu\t%s\t%.6f\t%d\t%.4f\t%.6g\t%d\n", model,
                          k + 1, coef_names[j].c_str(), c.true_value,
                          c.zeroed ? 1 : 0, c.coverage, c.mse, c.runs);
            out << buf;
          }
      };
  emit_block("gcwm", rep.gcwm);
  emit_block("cwm", rep.cwm);
  outputs.push_back(table_path.string());

  const fs::path sample_path = dir / "sample.tsv";
  write_sample_long(sample_path,
                    generate_gcwm_study(cfg.design, cfg.options.seed));
  outputs.push_back(sample_path.string());

  std::printf("severity-accuracy: runs=%d both_ok=%d gcwm_bic_wins=%d\n",
              rep.runs, rep.both_ok, rep.gcwm_bic_wins);
  double cov_sum = 0.0;
  int cov_n = 0;
  for (const auto& comp : rep.gcwm)
    for (const auto& c : comp)
      if (!c.zeroed && c.runs > 0) {
        cov_sum += c.coverage;
        ++cov_n;
      }
  if (cov_n > 0)
    std::printf("gcwm mean coverage (non-zeroed): %.4f\n", cov_sum / cov_n);
}

void simulate_classification(const StudyConfig& cfg, ZipCondition cond,
                             const fs::path& dir,
                             std::vector<std::string>& outputs) {
  const ClassificationStudyReport rep =
      run_zip_classification_study(cfg.design, cond, cfg.options);
  const std::string suffix = zip_condition_name(cond);
  const fs::path table_path = dir / ("classification_" + suffix + ".tsv");
  {
    std::ofstream out = open_output(table_path);
    out << "# study: zip-classification\tcondition: " << suffix
        << "\truns: " << rep.runs << "\tfailures: " << rep.failures << '\n';
    out << "metric\tmean\tmedian\tsd\n";
    char buf[128];
    auto emit = [&](const char* name, const std::vector<double>& xs) {
      std::snprintf(buf, sizeof buf, "%s\t%.6f\t%.6f\t%.6f\n", name,
                    mean_of(xs), median_of(xs), sd_of(xs));
      out << buf;
    };
    emit("misclassification", rep.misclassification);
    emit("purity", rep.purity);
    emit("ari", rep.ari);
  }
  outputs.push_back(table_path.string());

  const fs::path conf_path = dir / ("confusion_" + suffix + ".tsv");
  {
    std::ofstream out = open_output(conf_path);
    out << "# aligned true x predicted counts, first run\n";
    for (Eigen::Index i = 0; i < rep.first_confusion.rows(); ++i) {
      for (Eigen::Index j = 0; j < rep.first_confusion.cols(); ++j)
        out << (j ? "\t" : "") << rep.first_confusion(i, j);
      out << '\n';
    }
  }
  outputs.push_back(conf_path.string());

  const fs::path sample_path = dir / ("sample_" + suffix + ".tsv");
  write_sample_long(
      sample_path, generate_zip_study(cfg.design, cfg.options.seed, cond));
  outputs.push_back(sample_path.string());

  std::printf(
      "zip-classification %s: runs=%d misclass median=%.4f purity "
      "median=%.4f ari median=%.4f\n",
      suffix.c_str(), rep.runs, median_of(rep.misclassification),
      median_of(rep.purity), median_of(rep.ari));
}

void simulate_comparison(const StudyConfig& cfg, ZipCondition cond,
                         const fs::path& dir,
                         std::vector<std::string>& outputs) {
  const PartitionStudyReport rep =
      run_partition_study(cfg.design, cond, cfg.options);
  const std::string suffix = zip_condition_name(cond);
  const fs::path table_path = dir / ("comparison_" + suffix + ".tsv");
  {
    std::ofstream out = open_output(table_path);
    out << "# study: partition-comparison\tcondition: " << suffix
        << "\truns: " << rep.runs << '\n';
    out << "method\tmisclass_mean\tmisclass_sd\tpurity_mean\tpurity_sd\t"
           "ari_mean\tari_sd\tfailures\n";
    char buf[192];
    for (const auto& m : rep.methods) {
      std::snprintf(buf, sizeof buf,
                    "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%d\n",
                    m.method.c_str(), mean_of(m.misclassification),
                    sd_of(m.misclassification), mean_of(m.purity),
                    sd_of(m.purity), mean_of(m.ari), sd_of(m.ari),
                    m.failures);
      out << buf;
    }
  }
  outputs.push_back(table_path.string());

  const fs::path sample_path = dir / ("sample_" + suffix + ".tsv");
  write_sample_long(
      sample_path, generate_zip_study(cfg.design, cfg.options.seed, cond));
  outputs.push_back(sample_path.string());

  std::printf("partition-comparison %s:\n", suffix.c_str());
  for (const auto& m : rep.methods)
    std::printf("  %-10s purity mean=%.4f sd=%.4f\n", m.method.c_str(),
                mean_of(m.purity), sd_of(m.purity));
}

int cmd_simulate(const SimulateArgs& a) {
  auto t0 = std::chrono::steady_clock::now();
  StudyConfig cfg = parse_study_config_file(a.config_path);
  if (a.runs > 0) cfg.options.n_runs = a.runs;
  if (a.seed_set) cfg.options.seed = a.seed;
  if (!a.condition.empty()) {
    if (cfg.study == "severity-accuracy")
      throw input_error("--condition only applies to the zip studies");
    if (a.condition == "both") {
      cfg.run_normal = cfg.run_close = true;
    } else {
      const ZipCondition c = zip_condition_from_name(a.condition);
      cfg.run_normal = c == ZipCondition::normal;
      cfg.run_close = c == ZipCondition::close;
    }
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  if (cfg.study == "severity-accuracy") {
    simulate_severity(cfg, dir, outputs);
  } else {
    std::vector<ZipCondition> conds;
    if (cfg.run_normal) conds.push_back(ZipCondition::normal);
    if (cfg.run_close) conds.push_back(ZipCondition::close);
    for (ZipCondition c : conds) {
      if (cfg.study == "zip-classification")
        simulate_classification(cfg, c, dir, outputs);
      else
        simulate_comparison(cfg, c, dir, outputs);
    }
  }
  append_manifest(dir, "simulate", a.config_path, cfg.options.seed,
                  {a.config_path}, outputs, elapsed_ms(t0));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Mixture-model toolkit: fit cluster-weighted models, classify rows, "
      "test for zero inflation, and run simulation studies.\n"
      "GCWM_THREADS limits fit parallelism (default 1)."};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "Fit a model, write its document");
  fit->add_option("--data", fit_args.data_path, "CSV data file")->required();
  fit->add_option("--schema", fit_args.schema_path, "column-role schema file")
      ->required();
  fit->add_option("--kind", fit_args.kind,
                  "cwm (all-Gaussian covariates), gcwm, or zi-gcwm")
      ->check(CLI::IsMember({"cwm", "gcwm", "zi-gcwm"}));
  fit->add_option("--k", fit_args.k, "component count");
  fit->add_option("--k-range", fit_args.k_range,
                  "low:high component range; best BIC wins");
  fit->add_option("--seed", fit_args.seed, "restart-schedule seed");
  fit->add_option("--restarts", fit_args.restarts, "random restarts");
  fit->add_option("--out", fit_args.out_path, "model document path")
      ->required();
  fit->add_option("--select-response", fit_args.select_response,
                  "comma list of response-design covariates; log(NAME) "
                  "takes the log of a log-normal covariate");
  fit->add_option("--select-bernoulli", fit_args.select_bernoulli,
                  "comma list for the zero-model design (zi-gcwm)");
  fit->add_option("--offset-exposure", fit_args.exposure_col,
                  "exposure column (log-offset for count models)");
  fit->add_option("--weights-claims", fit_args.weights_col,
                  "per-row weight column for the response conditional");

  ClassifyArgs cls_args;
  CLI::App* cls =
      app.add_subcommand("classify", "Assign rows to a model's clusters");
  cls->add_option("--model", cls_args.model_path, "model document")
      ->required();
  cls->add_option("--data", cls_args.data_path, "CSV data file")->required();
  cls->add_option("--schema", cls_args.schema_path, "column-role schema file")
      ->required();
  cls->add_option("--out-prefix", cls_args.out_prefix,
                  "output path prefix (labels/posteriors/clusters)")
      ->required();

  LrTestArgs lr_args;
  CLI::App* lr = app.add_subcommand(
      "lrtest", "Zero-inflation likelihood-ratio test between documents");
  lr->add_option("--null", lr_args.null_path, "all-Poisson model document")
      ->required();
  lr->add_option("--alt", lr_args.alt_path, "zero-inflated model document")
      ->required();
  lr->add_flag("--per-cluster", lr_args.per_cluster,
               "print per-cluster rows, not just the pooled test");
  lr->add_option("--out", lr_args.out_path, "optional table file");

  SimulateArgs sim_args;
  CLI::App* sim =
      app.add_subcommand("simulate", "Run a configured simulation study");
  sim->add_option("--config", sim_args.config_path, "study config file")
      ->required();
  sim->add_option("--out", sim_args.out_dir, "output directory")->required();
  sim->add_option("--runs", sim_args.runs, "override configured run count");
  CLI::Option* seed_opt =
      sim->add_option("--seed", sim_args.seed, "override configured seed");
  sim->add_option("--condition", sim_args.condition,
                  "normal, close, or both (zip studies)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  sim_args.seed_set = seed_opt->count() > 0;

  try {
    if (fit->parsed()) return cmd_fit(fit_args);
    if (cls->parsed()) return cmd_classify(cls_args);
    if (lr->parsed()) return cmd_lrtest(lr_args);
    return cmd_simulate(sim_args);
  } catch (const input_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const component_collapse& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const convergence_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const sizing_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
