#include "gcwm/data.hpp"

#include "gcwm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gcwm {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == sep && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

double parse_double(const std::string& s, std::size_t line_no,
                    const std::string& column) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw input_error("line " + std::to_string(line_no) + ", column '" +
                      column + "': cannot parse '" + s + "' as a number");
  }
}

}  // namespace

Schema Schema::parse(std::istream& in) {
  Schema schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "response" || key == "exposure" || key == "weights" ||
        key == "id") {
      std::string col;
      ss >> col;
      if (col.empty())
        throw input_error("schema line " + std::to_string(line_no) +
                          ": missing column name after '" + key + "'");
      if (key == "response") schema.response = col;
      if (key == "exposure") schema.exposure = col;
      if (key == "weights") schema.weights = col;
      if (key == "id") schema.id = col;
    } else if (key == "covariate") {
      CovariateSpec spec;
      std::string role;
      ss >> spec.name >> role;
      if (spec.name.empty() || role.empty())
        throw input_error("schema line " + std::to_string(line_no) +
                          ": expected 'covariate <name> <role> [levels]'");
      if (role == "gaussian") {
        spec.role = Role::gaussian;
      } else if (role == "lognormal") {
        spec.role = Role::lognormal;
      } else if (role == "discrete") {
        spec.role = Role::discrete;
        std::string levels;
        ss >> levels;
        spec.levels = split(levels, ',');
        if (spec.levels.size() < 2)
          throw input_error("schema line " + std::to_string(line_no) +
                            ": discrete covariate '" + spec.name +
                            "' needs at least 2 comma-separated levels");
        std::vector<std::string> sorted = spec.levels;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          throw input_error("schema line " + std::to_string(line_no) +
                            ": duplicate level for '" + spec.name + "'");
      } else {
        throw input_error("schema line " + std::to_string(line_no) +
                          ": unknown role '" + role + "'");
      }
      schema.covariates.push_back(std::move(spec));
    } else {
      throw input_error("schema line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (schema.response.empty())
    throw input_error("schema: missing 'response' entry");
  return schema;
}

Schema Schema::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open schema file: " + path);
  return parse(in);
}

Dataset::Dataset(Eigen::VectorXd response, Eigen::VectorXd exposure,
                 Eigen::VectorXd claim_weights, Eigen::MatrixXd gaussian,
                 std::vector<CovariateSpec> gaussian_specs,
                 Eigen::MatrixXd lognormal,
                 std::vector<CovariateSpec> lognormal_specs,
                 std::vector<Eigen::VectorXi> discrete,
                 std::vector<CovariateSpec> discrete_specs,
                 std::vector<std::string> ids)
    : response_(std::move(response)),
      exposure_(std::move(exposure)),
      claim_weights_(std::move(claim_weights)),
      gaussian_(std::move(gaussian)),
      lognormal_(std::move(lognormal)),
      discrete_(std::move(discrete)),
      gaussian_specs_(std::move(gaussian_specs)),
      lognormal_specs_(std::move(lognormal_specs)),
      discrete_specs_(std::move(discrete_specs)),
      ids_(std::move(ids)) {
  const Eigen::Index n = response_.size();
  if (exposure_.size() == 0) exposure_ = Eigen::VectorXd::Ones(n);
  if (claim_weights_.size() == 0) claim_weights_ = Eigen::VectorXd::Ones(n);
  if (exposure_.size() != n || claim_weights_.size() != n ||
      gaussian_.rows() != n || lognormal_.rows() != n)
    throw input_error("dataset blocks disagree on row count");
  if ((exposure_.array() <= 0.0).any())
    throw input_error("exposure must be strictly positive");
  if ((claim_weights_.array() < 0.0).any())
    throw input_error("claim weights must be nonnegative");
  if (lognormal_.size() > 0 && (lognormal_.array() <= 0.0).any())
    throw input_error("log-normal covariates must be strictly positive");
  if (discrete_.size() != discrete_specs_.size() ||
      gaussian_.cols() != static_cast<Eigen::Index>(gaussian_specs_.size()) ||
      lognormal_.cols() != static_cast<Eigen::Index>(lognormal_specs_.size()))
    throw input_error("covariate blocks disagree with their specs");
  for (std::size_t q = 0; q < discrete_.size(); ++q) {
    if (discrete_[q].size() != n)
      throw input_error("dataset blocks disagree on row count");
    int c = static_cast<int>(discrete_specs_[q].levels.size());
    if ((discrete_[q].array() < 0).any() || (discrete_[q].array() >= c).any())
      throw input_error("discrete level index out of range for '" +
                        discrete_specs_[q].name + "'");
  }
  log_exposure_ = exposure_.array().log();
  log_lognormal_ = lognormal_.array().log();
}

Dataset Dataset::with_lognormal_as_gaussian() const {
  Eigen::MatrixXd g(gaussian_.rows(), gaussian_.cols() + lognormal_.cols());
  g << gaussian_, lognormal_;
  std::vector<CovariateSpec> specs = gaussian_specs_;
  for (CovariateSpec s : lognormal_specs_) {
    s.role = Role::gaussian;
    specs.push_back(std::move(s));
  }
  return Dataset(response_, exposure_, claim_weights_, std::move(g),
                 std::move(specs), Eigen::MatrixXd(gaussian_.rows(), 0), {},
                 discrete_, discrete_specs_, ids_);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd resp(m), expo(m), wts(m);
  Eigen::MatrixXd g(m, gaussian_.cols()), u(m, lognormal_.cols());
  std::vector<Eigen::VectorXi> disc(discrete_.size(), Eigen::VectorXi(m));
  std::vector<std::string> ids;
  if (!ids_.empty()) ids.resize(rows.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::Index r = rows[static_cast<std::size_t>(i)];
    resp(i) = response_(r);
    expo(i) = exposure_(r);
    wts(i) = claim_weights_(r);
    g.row(i) = gaussian_.row(r);
    u.row(i) = lognormal_.row(r);
    for (std::size_t q = 0; q < discrete_.size(); ++q)
      disc[q](i) = discrete_[q](r);
    if (!ids_.empty()) ids[static_cast<std::size_t>(i)] = ids_[r];
  }
  return Dataset(std::move(resp), std::move(expo), std::move(wts),
                 std::move(g), gaussian_specs_, std::move(u), lognormal_specs_,
                 std::move(disc), discrete_specs_, std::move(ids));
}

DesignMatrix build_design(const Dataset& data,
                          const std::vector<std::string>& selection) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.n());
  std::vector<Eigen::VectorXd> cols;
  std::vector<std::string> names;
  cols.push_back(Eigen::VectorXd::Ones(n));
  names.push_back("(intercept)");

  auto find_continuous = [&](const std::string& name, bool want_log,
                             Eigen::VectorXd& out) -> bool {
    for (Eigen::Index j = 0; j < data.p_gaussian(); ++j) {
      if (data.gaussian_specs()[static_cast<std::size_t>(j)].name == name) {
        if (want_log)
          throw input_error("log() selection requires a log-normal covariate: " +
                            name);
        out = data.gaussian().col(j);
        return true;
      }
    }
    for (Eigen::Index j = 0; j < data.p_lognormal(); ++j) {
      if (data.lognormal_specs()[static_cast<std::size_t>(j)].name == name) {
        out = want_log ? data.log_lognormal().col(j) : data.lognormal().col(j);
        return true;
      }
    }
    return false;
  };

  for (const std::string& entry : selection) {
    std::string name = entry;
    bool want_log = false;
    if (entry.size() > 5 && entry.substr(0, 4) == "log(" &&
        entry.back() == ')') {
      want_log = true;
      name = entry.substr(4, entry.size() - 5);
    }
    Eigen::VectorXd col;
    if (find_continuous(name, want_log, col)) {
      cols.push_back(std::move(col));
      names.push_back(entry);
      continue;
    }
    bool found = false;
    for (std::size_t q = 0; q < data.n_discrete(); ++q) {
      const CovariateSpec& spec = data.discrete_specs()[q];
      if (spec.name != name) continue;
      if (want_log)
        throw input_error("log() selection on discrete covariate: " + name);
      // Dummy columns against the first declared level.
      for (std::size_t s = 1; s < spec.levels.size(); ++s) {
        Eigen::VectorXd dummy(n);
        for (Eigen::Index i = 0; i < n; ++i)
          dummy(i) = data.discrete()[q](i) == static_cast<int>(s) ? 1.0 : 0.0;
        cols.push_back(std::move(dummy));
        names.push_back(name + "=" + spec.levels[s]);
      }
      found = true;
      break;
    }
    if (!found) throw input_error("unknown covariate in selection: " + name);
  }

  DesignMatrix design;
  design.X.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    design.X.col(static_cast<Eigen::Index>(j)) = cols[j];
  design.columns = std::move(names);
  return design;
}

Dataset load_csv(const std::string& path, const Schema& schema,
                 LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open data file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw input_error("empty CSV: " + path);
  std::vector<std::string> header = split(line, ',');
  std::unordered_map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < header.size(); ++j) col_of[header[j]] = j;

  auto require_col = [&](const std::string& name) -> std::size_t {
    auto it = col_of.find(name);
    if (it == col_of.end())
      throw input_error("CSV is missing column '" + name + "'");
    return it->second;
  };

  std::size_t response_col = require_col(schema.response);
  std::size_t exposure_col = schema.exposure.empty()
                                 ? static_cast<std::size_t>(-1)
                                 : require_col(schema.exposure);
  std::size_t weights_col = schema.weights.empty()
                                ? static_cast<std::size_t>(-1)
                                : require_col(schema.weights);
  std::size_t id_col = schema.id.empty() ? static_cast<std::size_t>(-1)
                                         : require_col(schema.id);
  struct Bound {
    const CovariateSpec* spec;
    std::size_t col;
  };
  std::vector<Bound> bound;
  for (const CovariateSpec& spec : schema.covariates)
    bound.push_back({&spec, require_col(spec.name)});

  std::vector<double> resp, expo, wts;
  std::vector<std::vector<double>> gcols, ucols;
  std::vector<std::vector<int>> dcols;
  std::vector<CovariateSpec> gspecs, uspecs, dspecs;
  for (const Bound& b : bound) {
    if (b.spec->role == Role::gaussian) {
      gspecs.push_back(*b.spec);
      gcols.emplace_back();
    } else if (b.spec->role == Role::lognormal) {
      uspecs.push_back(*b.spec);
      ucols.emplace_back();
    } else {
      dspecs.push_back(*b.spec);
      dcols.emplace_back();
    }
  }
  std::vector<std::string> ids;
  LoadReport local;
  LoadReport& rep = report ? *report : local;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split(line, ',');
    if (fields.size() < header.size())
      fields.resize(header.size());  // short row: treat missing as empty

    bool missing = fields[response_col].empty();
    if (exposure_col != static_cast<std::size_t>(-1))
      missing = missing || fields[exposure_col].empty();
    if (weights_col != static_cast<std::size_t>(-1))
      missing = missing || fields[weights_col].empty();
    for (const Bound& b : bound) missing = missing || fields[b.col].empty();
    if (missing) {
      rep.skipped_rows.push_back(line_no);
      continue;
    }

    resp.push_back(parse_double(fields[response_col], line_no, schema.response));
    if (exposure_col != static_cast<std::size_t>(-1)) {
      double e = parse_double(fields[exposure_col], line_no, schema.exposure);
      if (e <= 0.0)
        throw input_error("line " + std::to_string(line_no) +
                          ": exposure must be > 0, got " + fields[exposure_col]);
      expo.push_back(e);
    }
    if (weights_col != static_cast<std::size_t>(-1)) {
      double w = parse_double(fields[weights_col], line_no, schema.weights);
      if (w < 0.0)
        throw input_error("line " + std::to_string(line_no) +
                          ": weights must be >= 0");
      wts.push_back(w);
    }
    if (id_col != static_cast<std::size_t>(-1)) ids.push_back(fields[id_col]);

    std::size_t gi = 0, ui = 0, di = 0;
    for (const Bound& b : bound) {
      const std::string& raw = fields[b.col];
      if (b.spec->role == Role::gaussian) {
        gcols[gi++].push_back(parse_double(raw, line_no, b.spec->name));
      } else if (b.spec->role == Role::lognormal) {
        double v = parse_double(raw, line_no, b.spec->name);
        if (v <= 0.0)
          throw input_error("line " + std::to_string(line_no) +
                            ": log-normal covariate '" + b.spec->name +
                            "' must be > 0, got " + raw);
        ucols[ui++].push_back(v);
      } else {
        auto it = std::find(b.spec->levels.begin(), b.spec->levels.end(), raw);
        if (it == b.spec->levels.end())
          throw input_error("line " + std::to_string(line_no) +
                            ": unknown level '" + raw + "' for '" +
                            b.spec->name + "'");
        dcols[di++].push_back(
            static_cast<int>(it - b.spec->levels.begin()));
      }
    }
  }

  const Eigen::Index n = static_cast<Eigen::Index>(resp.size());
  rep.n_used = static_cast<std::size_t>(n);
  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()))
        .eval();
  };
  Eigen::MatrixXd g(n, static_cast<Eigen::Index>(gcols.size()));
  for (std::size_t j = 0; j < gcols.size(); ++j)
    g.col(static_cast<Eigen::Index>(j)) = to_vec(gcols[j]);
  Eigen::MatrixXd u(n, static_cast<Eigen::Index>(ucols.size()));
  for (std::size_t j = 0; j < ucols.size(); ++j)
    u.col(static_cast<Eigen::Index>(j)) = to_vec(ucols[j]);
  std::vector<Eigen::VectorXi> d;
  for (const std::vector<int>& col : dcols)
    d.push_back(Eigen::Map<const Eigen::VectorXi>(
                    col.data(), static_cast<Eigen::Index>(col.size()))
                    .eval());

  return Dataset(to_vec(resp),
                 expo.empty() ? Eigen::VectorXd() : to_vec(expo),
                 wts.empty() ? Eigen::VectorXd() : to_vec(wts), std::move(g),
                 std::move(gspecs), std::move(u), std::move(uspecs),
                 std::move(d), std::move(dspecs), std::move(ids));
}

void save_csv(const std::string& path, const Dataset& data,
              const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw input_error("cannot open output file: " + path);
  char buf[64];

  std::vector<std::string> header;
  if (!schema.id.empty()) header.push_back(schema.id);
  header.push_back(schema.response);
  if (!schema.exposure.empty()) header.push_back(schema.exposure);
  if (!schema.weights.empty()) header.push_back(schema.weights);
  for (const CovariateSpec& spec : schema.covariates) header.push_back(spec.name);
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << "\n";

  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };

  for (std::size_t i = 0; i < data.n(); ++i) {
    const Eigen::Index r = static_cast<Eigen::Index>(i);
    std::vector<std::string> fields;
    if (!schema.id.empty())
      fields.push_back(data.ids().empty() ? std::to_string(i + 1)
                                          : data.ids()[i]);
    fields.push_back(fmt(data.response()(r)));
    if (!schema.exposure.empty()) fields.push_back(fmt(data.exposure()(r)));
    if (!schema.weights.empty()) fields.push_back(fmt(data.claim_weights()(r)));
    std::size_t gi = 0, ui = 0, di = 0;
    for (const CovariateSpec& spec : schema.covariates) {
      if (spec.role == Role::gaussian)
        fields.push_back(fmt(data.gaussian()(r, static_cast<Eigen::Index>(gi++))));
      else if (spec.role == Role::lognormal)
        fields.push_back(
            fmt(data.lognormal()(r, static_cast<Eigen::Index>(ui++))));
      else
        fields.push_back(spec.levels[static_cast<std::size_t>(
            data.discrete()[di++](r))]);
    }
    for (std::size_t j = 0; j < fields.size(); ++j)
      out << (j ? "," : "") << fields[j];
    out << "\n";
  }
}

}  // namespace gcwm
