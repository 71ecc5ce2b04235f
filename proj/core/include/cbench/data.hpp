#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace cbench {

enum class Arm { RCT, NRS };

std::string to_string(Arm arm);
Arm arm_from_string(const std::string& s);

enum class ColumnKind { continuous, binary, categorical };
enum class ColumnRole { covariate, center_indicator };

// Describes one column of the *input* data. Categorical columns are expanded
// on load into k-1 indicator columns against the lexicographically first
// level, so downstream code only ever sees numeric columns.
struct CovariateSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  int levels = 0;  // categorical only, k >= 2
  ColumnRole role = ColumnRole::covariate;
  // Optional explicit level list; inferred from the data when empty.
  std::vector<std::string> level_names;
};

// One expanded (numeric) covariate column.
struct DataColumn {
  std::string name;    // e.g. "employment_cat2"
  std::string source;  // schema column it came from, e.g. "employment"
  ColumnRole role = ColumnRole::covariate;
};

// Row view materialized on demand; storage is columnar in Dataset.
struct Unit {
  std::int64_t id = 0;
  Arm arm = Arm::NRS;
  int z = 0;
  std::map<std::string, double> y;
  Eigen::VectorXd x;
};

// Immutable tabular study data. Safe to share across threads once built.
class Dataset {
 public:
  Dataset(std::vector<CovariateSchema> schema, std::vector<DataColumn> columns,
          std::vector<std::string> outcome_names, std::vector<std::int64_t> ids,
          std::vector<Arm> arms, std::vector<int> z, Eigen::MatrixXd x, Eigen::MatrixXd y);

  int n() const { return static_cast<int>(ids_.size()); }
  int n_covariates() const { return static_cast<int>(columns_.size()); }
  int n_outcomes() const { return static_cast<int>(outcome_names_.size()); }

  const std::vector<CovariateSchema>& schema() const { return schema_; }
  const std::vector<DataColumn>& columns() const { return columns_; }
  const std::vector<std::string>& outcome_names() const { return outcome_names_; }

  std::int64_t id(int i) const { return ids_[static_cast<std::size_t>(i)]; }
  Arm arm(int i) const { return arms_[static_cast<std::size_t>(i)]; }
  int z(int i) const { return z_[static_cast<std::size_t>(i)]; }
  double x(int i, int j) const { return x_(i, j); }

  const Eigen::MatrixXd& covariates() const { return x_; }
  const Eigen::MatrixXd& outcomes() const { return y_; }

  int outcome_index(const std::string& name) const;          // -1 if absent
  int column_index(const std::string& name) const;           // -1 if absent
  Eigen::VectorXd outcome(const std::string& name) const;    // throws MissingColumn
  Eigen::VectorXd treatment() const;                         // z as double vector

  int index_of_id(std::int64_t id) const;  // throws UnknownId
  Unit unit(int i) const;

  std::vector<int> treated_indices() const;
  std::vector<int> control_indices() const;

  // New dataset from a row subset. reassign_ids gives fresh sequential ids,
  // which bootstrap resamples need since duplicated rows would otherwise
  // violate id uniqueness.
  Dataset subset(const std::vector<int>& rows, bool reassign_ids = false) const;

 private:
  std::vector<CovariateSchema> schema_;
  std::vector<DataColumn> columns_;
  std::vector<std::string> outcome_names_;
  std::vector<std::int64_t> ids_;
  std::vector<Arm> arms_;
  std::vector<int> z_;
  Eigen::MatrixXd x_;  // n x p expanded covariates
  Eigen::MatrixXd y_;  // n x n_outcomes
  std::unordered_map<std::int64_t, int> id_index_;
};

// CSV ingestion. Reserved columns: id (integer), arm (RCT|NRS), z (0/1);
// outcome columns are prefixed "y_". Remaining header names must match the
// schema. Categorical columns are expanded as described on CovariateSchema.
Dataset load_csv(const std::string& path, const std::vector<CovariateSchema>& schema);

// Writes the expanded representation (one numeric column per DataColumn),
// cells with 12 significant digits.
void write_csv(const Dataset& d, const std::string& path);

// Convenience: every non-reserved column becomes a continuous covariate;
// columns named center_* get the center_indicator role. Used by the CLI for
// files produced by `gen` or by external tools.
std::vector<CovariateSchema> infer_schema_from_csv(const std::string& path);

Dataset arm_subset(const Dataset& d, Arm arm);

struct GroupSummary {
  std::string column;
  double mean_t = 0.0, sd_t = 0.0;
  int n_t = 0;
  double mean_c = 0.0, sd_c = 0.0;
  int n_c = 0;
};

// Per-covariate means/sds (sample, n-1) by treatment group.
std::vector<GroupSummary> summarize(const Dataset& d);

}  // namespace cbench
