#include "cbench/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cbench/error.hpp"
#include "cbench/stats.hpp"

namespace cbench {

std::string to_string(Arm arm) { return arm == Arm::RCT ? "RCT" : "NRS"; }

Arm arm_from_string(const std::string& s) {
  if (s == "RCT") return Arm::RCT;
  if (s == "NRS") return Arm::NRS;
  fail("UnknownArm", "arm must be RCT or NRS, got '" + s + "'");
}

Dataset::Dataset(std::vector<CovariateSchema> schema, std::vector<DataColumn> columns,
                 std::vector<std::string> outcome_names, std::vector<std::int64_t> ids,
                 std::vector<Arm> arms, std::vector<int> z, Eigen::MatrixXd x,
                 Eigen::MatrixXd y)
    : schema_(std::move(schema)),
      columns_(std::move(columns)),
      outcome_names_(std::move(outcome_names)),
      ids_(std::move(ids)),
      arms_(std::move(arms)),
      z_(std::move(z)),
      x_(std::move(x)),
      y_(std::move(y)) {
  const int n = static_cast<int>(ids_.size());
  require(static_cast<int>(arms_.size()) == n && static_cast<int>(z_.size()) == n,
          "DomainError", "Dataset field lengths disagree");
  require(x_.rows() == n && x_.cols() == static_cast<int>(columns_.size()), "DomainError",
          "covariate matrix shape mismatch");
  require(y_.rows() == n && y_.cols() == static_cast<int>(outcome_names_.size()),
          "DomainError", "outcome matrix shape mismatch");
  for (int i = 0; i < n; ++i) {
    require(z_[static_cast<std::size_t>(i)] == 0 || z_[static_cast<std::size_t>(i)] == 1,
            "NonBinaryTreatment", "z must be 0/1 at row " + std::to_string(i));
    if (!id_index_.emplace(ids_[static_cast<std::size_t>(i)], i).second) {
      fail("DuplicateId", "duplicate unit id " + std::to_string(ids_[static_cast<std::size_t>(i)]));
    }
  }
  require(x_.allFinite(), "NaNCell", "covariate matrix contains non-finite values");
  require(y_.size() == 0 || y_.allFinite(), "NaNCell", "outcome matrix contains non-finite values");
}

int Dataset::outcome_index(const std::string& name) const {
  for (std::size_t k = 0; k < outcome_names_.size(); ++k) {
    if (outcome_names_[k] == name) return static_cast<int>(k);
  }
  return -1;
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j].name == name) return static_cast<int>(j);
  }
  return -1;
}

Eigen::VectorXd Dataset::outcome(const std::string& name) const {
  const int k = outcome_index(name);
  require(k >= 0, "MissingColumn", "no outcome named '" + name + "'");
  return y_.col(k);
}

Eigen::VectorXd Dataset::treatment() const {
  Eigen::VectorXd out(n());
  for (int i = 0; i < n(); ++i) out[i] = z_[static_cast<std::size_t>(i)];
  return out;
}

int Dataset::index_of_id(std::int64_t id) const {
  const auto it = id_index_.find(id);
  require(it != id_index_.end(), "UnknownId", "no unit with id " + std::to_string(id));
  return it->second;
}

Unit Dataset::unit(int i) const {
  Unit u;
  u.id = ids_[static_cast<std::size_t>(i)];
  u.arm = arms_[static_cast<std::size_t>(i)];
  u.z = z_[static_cast<std::size_t>(i)];
  for (std::size_t k = 0; k < outcome_names_.size(); ++k) {
    u.y[outcome_names_[k]] = y_(i, static_cast<int>(k));
  }
  u.x = x_.row(i).transpose();
  return u;
}

std::vector<int> Dataset::treated_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n(); ++i) {
    if (z_[static_cast<std::size_t>(i)] == 1) out.push_back(i);
  }
  return out;
}

std::vector<int> Dataset::control_indices() const {
  std::vector<int> out;
  for (int i = 0; i < n(); ++i) {
    if (z_[static_cast<std::size_t>(i)] == 0) out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(const std::vector<int>& rows, bool reassign_ids) const {
  const int m = static_cast<int>(rows.size());
  std::vector<std::int64_t> ids(rows.size());
  std::vector<Arm> arms(rows.size());
  std::vector<int> z(rows.size());
  Eigen::MatrixXd x(m, x_.cols());
  Eigen::MatrixXd y(m, y_.cols());
  for (int i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    require(r >= 0 && r < n(), "DomainError", "subset row out of range");
    ids[static_cast<std::size_t>(i)] = reassign_ids ? i : ids_[static_cast<std::size_t>(r)];
    arms[static_cast<std::size_t>(i)] = arms_[static_cast<std::size_t>(r)];
    z[static_cast<std::size_t>(i)] = z_[static_cast<std::size_t>(r)];
    x.row(i) = x_.row(r);
    y.row(i) = y_.row(r);
  }
  return Dataset(schema_, columns_, outcome_names_, std::move(ids), std::move(arms),
                 std::move(z), std::move(x), std::move(y));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& cell, int row, const std::string& col) {
  if (cell.empty()) fail("NaNCell", "empty cell at row " + std::to_string(row) + ", column " + col);
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &pos);
  } catch (const std::exception&) {
    fail("NaNCell", "non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                        ", column " + col);
  }
  if (pos != cell.size() || !std::isfinite(v)) {
    fail("NaNCell", "invalid numeric cell '" + cell + "' at row " + std::to_string(row) +
                        ", column " + col);
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::vector<CovariateSchema>& schema) {
  std::ifstream in(path);
  require(in.good(), "FileNotFound", "cannot open '" + path + "'");

  {
    std::set<std::string> names;
    for (const auto& s : schema) {
      require(names.insert(s.name).second, "DuplicateColumn", "schema name '" + s.name + "' repeats");
      if (s.kind == ColumnKind::categorical) {
        require(s.levels >= 2, "DomainError",
                "categorical column '" + s.name + "' needs k >= 2 levels");
      }
    }
  }

  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), "MissingData",
          "file '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(header_line);

  auto col_of = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<int>(j);
    }
    return -1;
  };

  const int id_col = col_of("id");
  const int arm_col = col_of("arm");
  const int z_col = col_of("z");
  require(id_col >= 0, "MissingColumn", "reserved column 'id' missing");
  require(arm_col >= 0, "MissingColumn", "reserved column 'arm' missing");
  require(z_col >= 0, "MissingColumn", "reserved column 'z' missing");

  std::vector<std::string> outcome_names;
  std::vector<int> outcome_cols;
  std::vector<int> schema_cols(schema.size(), -1);
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string& name = header[j];
    if (name == "id" || name == "arm" || name == "z") continue;
    if (name.rfind("y_", 0) == 0) {
      outcome_names.push_back(name);
      outcome_cols.push_back(static_cast<int>(j));
      continue;
    }
    bool known = false;
    for (std::size_t s = 0; s < schema.size(); ++s) {
      if (schema[s].name == name) {
        schema_cols[s] = static_cast<int>(j);
        known = true;
        break;
      }
    }
    require(known, "UnknownColumn", "column '" + name + "' not in schema");
  }
  for (std::size_t s = 0; s < schema.size(); ++s) {
    require(schema_cols[s] >= 0, "MissingColumn", "schema column '" + schema[s].name + "' missing");
  }

  struct RawRow {
    std::int64_t id;
    Arm arm;
    int z;
    std::vector<double> y;
    std::vector<std::string> cells;  // one per schema column
  };
  std::vector<RawRow> rows;
  std::string line;
  int row_number = 0;  // 1-based, excluding header
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == header.size(), "MissingColumn",
            "row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                " cells, expected " + std::to_string(header.size()));
    RawRow r;
    const double id_val = parse_number(cells[static_cast<std::size_t>(id_col)], row_number, "id");
    r.id = static_cast<std::int64_t>(id_val);
    require(static_cast<double>(r.id) == id_val, "DomainError",
            "non-integer id at row " + std::to_string(row_number));
    r.arm = arm_from_string(cells[static_cast<std::size_t>(arm_col)]);
    const double zv = parse_number(cells[static_cast<std::size_t>(z_col)], row_number, "z");
    if (zv != 0.0 && zv != 1.0) {
      fail("NonBinaryTreatment", "z=" + cells[static_cast<std::size_t>(z_col)] + " at row " +
                                     std::to_string(row_number));
    }
    r.z = static_cast<int>(zv);
    for (std::size_t k = 0; k < outcome_cols.size(); ++k) {
      r.y.push_back(parse_number(cells[static_cast<std::size_t>(outcome_cols[k])], row_number,
                                 outcome_names[k]));
    }
    for (std::size_t s = 0; s < schema.size(); ++s) {
      r.cells.push_back(cells[static_cast<std::size_t>(schema_cols[s])]);
    }
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), "MissingData", "file '" + path + "' has a header but no rows");

  // Resolve categorical levels, then build the expanded column list.
  std::vector<std::vector<std::string>> levels(schema.size());
  for (std::size_t s = 0; s < schema.size(); ++s) {
    if (schema[s].kind != ColumnKind::categorical) continue;
    if (!schema[s].level_names.empty()) {
      levels[s] = schema[s].level_names;
      std::sort(levels[s].begin(), levels[s].end());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string& v = rows[i].cells[s];
        if (!std::binary_search(levels[s].begin(), levels[s].end(), v)) {
          fail("UnknownCategoryLevel", "level '" + v + "' at row " + std::to_string(i + 1) +
                                           ", column " + schema[s].name);
        }
      }
    } else {
      std::set<std::string> seen;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        seen.insert(rows[i].cells[s]);
        if (static_cast<int>(seen.size()) > schema[s].levels) {
          fail("UnknownCategoryLevel", "more than " + std::to_string(schema[s].levels) +
                                           " levels in column " + schema[s].name + " (row " +
                                           std::to_string(i + 1) + " introduces '" +
                                           rows[i].cells[s] + "')");
        }
      }
      levels[s].assign(seen.begin(), seen.end());
    }
  }

  std::vector<DataColumn> columns;
  for (std::size_t s = 0; s < schema.size(); ++s) {
    if (schema[s].kind == ColumnKind::categorical) {
      // Lexicographically first level is the reference and gets no column.
      for (std::size_t l = 1; l < levels[s].size(); ++l) {
        columns.push_back({schema[s].name + "_" + levels[s][l], schema[s].name, schema[s].role});
      }
    } else {
      columns.push_back({schema[s].name, schema[s].name, schema[s].role});
    }
  }

  const int n = static_cast<int>(rows.size());
  const int p = static_cast<int>(columns.size());
  Eigen::MatrixXd x(n, p);
  Eigen::MatrixXd y(n, static_cast<int>(outcome_names.size()));
  std::vector<std::int64_t> ids(rows.size());
  std::vector<Arm> arms(rows.size());
  std::vector<int> z(rows.size());
  for (int i = 0; i < n; ++i) {
    const RawRow& r = rows[static_cast<std::size_t>(i)];
    ids[static_cast<std::size_t>(i)] = r.id;
    arms[static_cast<std::size_t>(i)] = r.arm;
    z[static_cast<std::size_t>(i)] = r.z;
    for (std::size_t k = 0; k < r.y.size(); ++k) y(i, static_cast<int>(k)) = r.y[k];
    int j = 0;
    for (std::size_t s = 0; s < schema.size(); ++s) {
      if (schema[s].kind == ColumnKind::categorical) {
        for (std::size_t l = 1; l < levels[s].size(); ++l) {
          x(i, j++) = (r.cells[s] == levels[s][l]) ? 1.0 : 0.0;
        }
      } else {
        const double v = parse_number(r.cells[s], i + 1, schema[s].name);
        if (schema[s].kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
          fail("NonBinaryCovariate", "binary column " + schema[s].name + " has value '" +
                                         r.cells[s] + "' at row " + std::to_string(i + 1));
        }
        x(i, j++) = v;
      }
    }
  }

  return Dataset(schema, std::move(columns), std::move(outcome_names), std::move(ids),
                 std::move(arms), std::move(z), std::move(x), std::move(y));
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "IoError", "cannot write '" + path + "'");
  out << "id,arm,z";
  for (const auto& name : d.outcome_names()) out << "," << name;
  for (const auto& col : d.columns()) out << "," << col.name;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    out << buf;
  };
  for (int i = 0; i < d.n(); ++i) {
    out << d.id(i) << "," << to_string(d.arm(i)) << "," << d.z(i);
    for (int k = 0; k < d.n_outcomes(); ++k) {
      out << ",";
      put(d.outcomes()(i, k));
    }
    for (int j = 0; j < d.n_covariates(); ++j) {
      out << ",";
      put(d.x(i, j));
    }
    out << "\n";
  }
  require(out.good(), "IoError", "write failed for '" + path + "'");
}

std::vector<CovariateSchema> infer_schema_from_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "FileNotFound", "cannot open '" + path + "'");
  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), "MissingData",
          "file '" + path + "' is empty");
  std::vector<CovariateSchema> schema;
  for (const auto& name : split_csv_line(header_line)) {
    if (name == "id" || name == "arm" || name == "z" || name.rfind("y_", 0) == 0) continue;
    CovariateSchema s;
    s.name = name;
    s.kind = ColumnKind::continuous;
    s.role = name.rfind("center_", 0) == 0 ? ColumnRole::center_indicator : ColumnRole::covariate;
    schema.push_back(std::move(s));
  }
  return schema;
}

Dataset arm_subset(const Dataset& d, Arm arm) {
  std::vector<int> rows;
  for (int i = 0; i < d.n(); ++i) {
    if (d.arm(i) == arm) rows.push_back(i);
  }
  require(!rows.empty(), "EmptyArm", "no units in arm " + to_string(arm));
  return d.subset(rows);
}

std::vector<GroupSummary> summarize(const Dataset& d) {
  const std::vector<int> treated = d.treated_indices();
  const std::vector<int> control = d.control_indices();
  require(treated.size() >= 2 && control.size() >= 2, "TooFewUnits",
          "summarize needs n >= 2 per treatment group");
  std::vector<GroupSummary> out;
  out.reserve(static_cast<std::size_t>(d.n_covariates()));
  auto column_values = [&](const std::vector<int>& rows, int j) {
    std::vector<double> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = d.x(rows[i], j);
    return v;
  };
  for (int j = 0; j < d.n_covariates(); ++j) {
    GroupSummary s;
    s.column = d.columns()[static_cast<std::size_t>(j)].name;
    const std::vector<double> xt = column_values(treated, j);
    const std::vector<double> xc = column_values(control, j);
    s.mean_t = mean(xt);
    s.sd_t = sample_sd(xt);
    s.n_t = static_cast<int>(xt.size());
    s.mean_c = mean(xc);
    s.sd_c = sample_sd(xc);
    s.n_c = static_cast<int>(xc.size());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cbench
