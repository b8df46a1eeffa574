#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace gcwm {

enum class Role { gaussian, lognormal, discrete };

struct CovariateSpec {
  std::string name;
  Role role = Role::gaussian;
  // Ordered category labels; required (size >= 2) iff role == discrete.
  std::vector<std::string> levels;
};

// Column-role mapping for a CSV file. Parsed from a key-value text document:
//   response <column>
//   exposure <column>          (optional)
//   weights <column>           (optional)
//   id <column>                (optional)
//   covariate <name> gaussian
//   covariate <name> lognormal
//   covariate <name> discrete <level1,level2,...>
struct Schema {
  std::string response;
  std::string exposure;
  std::string weights;
  std::string id;
  std::vector<CovariateSpec> covariates;

  static Schema parse(std::istream& in);
  static Schema parse_file(const std::string& path);
};

struct LoadReport {
  std::size_t n_used = 0;
  std::vector<std::size_t> skipped_rows;  // 1-based CSV line numbers
};

// Immutable typed sample. Covariates are split by role into a Gaussian
// block, a strictly positive log-normal block (with its log cached), and
// per-covariate integer level indices for discrete covariates.
class Dataset {
 public:
  Dataset(Eigen::VectorXd response, Eigen::VectorXd exposure,
          Eigen::VectorXd claim_weights, Eigen::MatrixXd gaussian,
          std::vector<CovariateSpec> gaussian_specs, Eigen::MatrixXd lognormal,
          std::vector<CovariateSpec> lognormal_specs,
          std::vector<Eigen::VectorXi> discrete,
          std::vector<CovariateSpec> discrete_specs,
          std::vector<std::string> ids = {});

  std::size_t n() const { return static_cast<std::size_t>(response_.size()); }

  const Eigen::VectorXd& response() const { return response_; }
  const Eigen::VectorXd& exposure() const { return exposure_; }
  const Eigen::VectorXd& log_exposure() const { return log_exposure_; }
  const Eigen::VectorXd& claim_weights() const { return claim_weights_; }

  const Eigen::MatrixXd& gaussian() const { return gaussian_; }
  const Eigen::MatrixXd& lognormal() const { return lognormal_; }
  const Eigen::MatrixXd& log_lognormal() const { return log_lognormal_; }
  const std::vector<Eigen::VectorXi>& discrete() const { return discrete_; }

  const std::vector<CovariateSpec>& gaussian_specs() const {
    return gaussian_specs_;
  }
  const std::vector<CovariateSpec>& lognormal_specs() const {
    return lognormal_specs_;
  }
  const std::vector<CovariateSpec>& discrete_specs() const {
    return discrete_specs_;
  }
  const std::vector<std::string>& ids() const { return ids_; }

  Eigen::Index p_gaussian() const { return gaussian_.cols(); }
  Eigen::Index p_lognormal() const { return lognormal_.cols(); }
  std::size_t n_discrete() const { return discrete_.size(); }

  // Copy with every log-normal covariate re-roled as Gaussian (values moved
  // into the Gaussian block untransformed). Used by the all-Gaussian
  // baseline model kind.
  Dataset with_lognormal_as_gaussian() const;

  // Copy restricted to the given rows (in order).
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  Eigen::VectorXd response_;
  Eigen::VectorXd exposure_;
  Eigen::VectorXd log_exposure_;
  Eigen::VectorXd claim_weights_;
  Eigen::MatrixXd gaussian_;
  Eigen::MatrixXd lognormal_;
  Eigen::MatrixXd log_lognormal_;
  std::vector<Eigen::VectorXi> discrete_;
  std::vector<CovariateSpec> gaussian_specs_;
  std::vector<CovariateSpec> lognormal_specs_;
  std::vector<CovariateSpec> discrete_specs_;
  std::vector<std::string> ids_;
};

struct DesignMatrix {
  Eigen::MatrixXd X;                 // n x (1 + q), first column all ones
  std::vector<std::string> columns;  // "(intercept)", then covariate columns
};

// Selection entries: a covariate name (continuous covariates contribute one
// column; discrete covariates expand to c_r - 1 dummy columns against the
// first declared level), or "log(Name)" for the natural log of a log-normal
// covariate. The intercept column is always present and first.
DesignMatrix build_design(const Dataset& data,
                          const std::vector<std::string>& selection);

Dataset load_csv(const std::string& path, const Schema& schema,
                 LoadReport* report = nullptr);

// Inverse of load_csv up to numeric formatting;
// used for round-trip checks and for persisting generated samples.
void save_csv(const std::string& path, const Dataset& data,
              const Schema& schema);

}  // namespace gcwm
