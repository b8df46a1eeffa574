#include "gcwm/model_io.hpp"

#include "gcwm/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace gcwm {

namespace {

// Default nlohmann::json keeps keys sorted, which is what makes equal
// models byte-identical on disk.
using json = nlohmann::json;

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const json& a) {
  if (!a.is_array()) throw input_error("model document: expected an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Eigen::MatrixXd matrix_from(const json& a) {
  if (!a.is_array()) throw input_error("model document: expected a matrix");
  const Eigen::Index rows = static_cast<Eigen::Index>(a.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(a[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = a[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw input_error("model document: ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

json glm_to_json(const GlmFit& fit) {
  json j;
  j["coefficients"] = to_json(fit.coefficients);
  j["std_errors"] = to_json(fit.std_errors);
  j["dispersion"] = fit.dispersion;
  j["has_dispersion"] = fit.has_dispersion;
  j["loglik"] = fit.loglik;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["separation"] = fit.separation;
  j["degenerate_dispersion"] = fit.degenerate_dispersion;
  j["dropped_columns"] = fit.dropped_columns;
  return j;
}

GlmFit glm_from_json(const json& j) {
  GlmFit fit;
  fit.coefficients = vector_from(j.at("coefficients"));
  fit.std_errors = vector_from(j.at("std_errors"));
  fit.dispersion = j.at("dispersion").get<double>();
  fit.has_dispersion = j.at("has_dispersion").get<bool>();
  fit.loglik = j.at("loglik").get<double>();
  fit.iterations = j.at("iterations").get<int>();
  fit.converged = j.at("converged").get<bool>();
  fit.separation = j.at("separation").get<bool>();
  fit.degenerate_dispersion = j.at("degenerate_dispersion").get<bool>();
  fit.dropped_columns = j.at("dropped_columns").get<std::vector<int>>();
  return fit;
}

json component_to_json(const ComponentParams& c) {
  json j;
  j["tau"] = c.tau;
  j["glm"] = glm_to_json(c.glm);
  if (c.gaussian) {
    j["gaussian"]["mu"] = to_json(c.gaussian->mu);
    j["gaussian"]["sigma"] = to_json(c.gaussian->sigma);
  }
  if (c.lognormal) {
    j["lognormal"]["mu"] = to_json(c.lognormal->log_scale.mu);
    j["lognormal"]["sigma"] = to_json(c.lognormal->log_scale.sigma);
  }
  if (c.discrete) {
    json blocks = json::array();
    for (const auto& g : c.discrete->gamma) blocks.push_back(to_json(g));
    j["discrete"] = std::move(blocks);
  }
  if (c.zip) {
    j["zip"]["beta"] = to_json(c.zip->beta);
    j["zip"]["beta_bar"] = to_json(c.zip->beta_bar);
    j["zip"]["offset_log_exposure"] = c.zip->offset_log_exposure;
  }
  if (c.zip_bernoulli) j["zip_bernoulli"] = glm_to_json(*c.zip_bernoulli);
  return j;
}

ComponentParams component_from_json(const json& j) {
  ComponentParams c;
  c.tau = j.at("tau").get<double>();
  c.glm = glm_from_json(j.at("glm"));
  if (j.contains("gaussian")) {
    GaussianMarginal g;
    g.mu = vector_from(j["gaussian"].at("mu"));
    g.sigma = matrix_from(j["gaussian"].at("sigma"));
    g.finalize();
    c.gaussian = std::move(g);
  }
  if (j.contains("lognormal")) {
    LogNormalMarginal l;
    l.log_scale.mu = vector_from(j["lognormal"].at("mu"));
    l.log_scale.sigma = matrix_from(j["lognormal"].at("sigma"));
    l.log_scale.finalize();
    c.lognormal = std::move(l);
  }
  if (j.contains("discrete")) {
    MultinomialMarginal m;
    for (const auto& g : j["discrete"]) m.gamma.push_back(vector_from(g));
    c.discrete = std::move(m);
  }
  if (j.contains("zip")) {
    ZipConditional z;
    z.beta = vector_from(j["zip"].at("beta"));
    z.beta_bar = vector_from(j["zip"].at("beta_bar"));
    z.offset_log_exposure = j["zip"].at("offset_log_exposure").get<bool>();
    c.zip = std::move(z);
  }
  if (j.contains("zip_bernoulli"))
    c.zip_bernoulli = glm_from_json(j["zip_bernoulli"]);
  return c;
}

json table_to_json(const SelectionTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    json row;
    row["K"] = r.K;
    if (r.criteria) {
      row["loglik"] = r.criteria->loglik;
      row["n_params"] = r.criteria->n_params;
      row["n"] = r.criteria->n;
      row["aic"] = r.criteria->aic;
      row["bic"] = r.criteria->bic;
    } else {
      row["failure"] = r.failure;
    }
    rows.push_back(std::move(row));
  }
  json j;
  j["best_K"] = table.best_K;
  j["rows"] = std::move(rows);
  return j;
}

SelectionTable table_from_json(const json& j) {
  SelectionTable table;
  table.best_K = j.at("best_K").get<int>();
  for (const auto& row : j.at("rows")) {
    SelectionRow r;
    r.K = row.at("K").get<int>();
    if (row.contains("failure")) {
      r.failure = row["failure"].get<std::string>();
    } else {
      InfoCriteria c;
      c.loglik = row.at("loglik").get<double>();
      c.n_params = row.at("n_params").get<int>();
      c.n = row.at("n").get<std::size_t>();
      c.aic = row.at("aic").get<double>();
      c.bic = row.at("bic").get<double>();
      r.criteria = c;
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace

void write_model(std::ostream& out, const GcwmModel& model,
                 const SelectionTable* table) {
  json j;
  j["format"] = "gcwm-model/1";
  j["manifest"] = "manifest.jsonl";
  j["K"] = model.K;
  j["response_kind"] = response_kind_name(model.response_kind);
  j["selections"]["response"] = model.selections.response;
  j["selections"]["bernoulli"] = model.selections.bernoulli;
  j["seed"] = model.seed;
  j["loglik"] = model.loglik;
  j["loglik_trace"] = model.loglik_trace;
  j["n_params"] = model.n_params;
  j["converged"] = model.converged;
  json comps = json::array();
  for (const auto& c : model.components)
    comps.push_back(component_to_json(c));
  j["components"] = std::move(comps);
  j["hard_labels"] = model.hard_labels;
  if (!model.partition_labels.empty()) {
    j["partition_labels"] = model.partition_labels;
    j["cluster_loglik_poisson"] = model.cluster_loglik_poisson;
    j["cluster_loglik_zip"] = model.cluster_loglik_zip;
    j["zero_model_df"] = model.zero_model_df;
    json fits = json::array();
    for (const auto& f : model.cluster_poisson_fits)
      fits.push_back(glm_to_json(f));
    j["cluster_poisson_fits"] = std::move(fits);
  }
  if (table) j["selection_table"] = table_to_json(*table);
  out << j.dump(1) << '\n';
}

void save_model(const std::string& path, const GcwmModel& model,
                const SelectionTable* table) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot write model document: " + path);
  write_model(out, model, table);
  if (!out) throw input_error("failed writing model document: " + path);
}

GcwmModel read_model(std::istream& in, SelectionTable* table) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw input_error(std::string("model document is not valid JSON: ") +
                      e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "gcwm-model/1")
      throw input_error("unrecognized model document format");
    GcwmModel model;
    model.K = j.at("K").get<int>();
    model.response_kind =
        response_kind_from_name(j.at("response_kind").get<std::string>());
    model.selections.response =
        j.at("selections").at("response").get<std::vector<std::string>>();
    model.selections.bernoulli =
        j.at("selections").at("bernoulli").get<std::vector<std::string>>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.loglik = j.at("loglik").get<double>();
    model.loglik_trace = j.at("loglik_trace").get<std::vector<double>>();
    model.n_params = j.at("n_params").get<int>();
    model.converged = j.at("converged").get<bool>();
    for (const auto& c : j.at("components"))
      model.components.push_back(component_from_json(c));
    if (static_cast<int>(model.components.size()) != model.K)
      throw input_error("model document: component count does not match K");
    model.hard_labels = j.at("hard_labels").get<std::vector<int>>();
    if (j.contains("partition_labels")) {
      model.partition_labels =
          j["partition_labels"].get<std::vector<int>>();
      model.cluster_loglik_poisson =
          j.at("cluster_loglik_poisson").get<std::vector<double>>();
      model.cluster_loglik_zip =
          j.at("cluster_loglik_zip").get<std::vector<double>>();
      model.zero_model_df = j.at("zero_model_df").get<int>();
      for (const auto& f : j.at("cluster_poisson_fits"))
        model.cluster_poisson_fits.push_back(glm_from_json(f));
    }
    if (table && j.contains("selection_table"))
      *table = table_from_json(j["selection_table"]);
    return model;
  } catch (const json::exception& e) {
    throw input_error(std::string("malformed model document: ") + e.what());
  }
}

GcwmModel load_model(const std::string& path, SelectionTable* table) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open model document: " + path);
  return read_model(in, table);
}

}  // namespace gcwm
