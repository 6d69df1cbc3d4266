#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sal/dataset.hpp"

namespace sal {

struct TableSchema {
  std::string target;
  std::string environment;  // empty when the table has no environment column
  std::vector<std::string> features;
  std::map<std::string, std::vector<std::string>> categorical;  // feature -> categories

  void validate() const {
    require(!target.empty(), "TableSchema: target column required");
    require(!features.empty(), "TableSchema: at least one feature required");
    std::set<std::string> seen;
    for (const auto& f : features) {
      require(f != target, "TableSchema: target listed as a feature");
      require(f != environment, "TableSchema: environment listed as a feature");
      require(seen.insert(f).second, "TableSchema: duplicate feature " + f);
    }
    for (const auto& [col, cats] : categorical) {
      require(seen.count(col) == 1, "TableSchema: categorical column " + col + " not a feature");
      require(!cats.empty(), "TableSchema: categorical column " + col + " has no categories");
      std::set<std::string> cs(cats.begin(), cats.end());
      require(cs.size() == cats.size(), "TableSchema: duplicate category in " + col);
    }
  }
};

struct Table {
  std::vector<std::string> feature_names;  // one-hot expanded
  Matrix X;
  Vector y;
  std::vector<std::string> env_labels;  // empty strings when no environment column

  Index n() const { return X.rows(); }
  Index dim() const { return X.cols(); }
};

struct NormalizationStats {
  Vector mean;
  Vector std;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// comma splitting with double-quote support
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

inline std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Loads a comma-separated file with a header row against the schema,
// one-hot encoding the declared categorical columns. Missing cells and
// malformed numbers fail loudly with their locations.
inline Table load_csv(const std::string& path, const TableSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  require(in.good(), "load_csv: cannot open " + path);

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "load_csv: " + path + " is empty");
  const std::vector<std::string> header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col_at;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = detail::trim(header[i]);
    require(col_at.emplace(name, i).second, "load_csv: duplicate column " + name);
  }
  auto column = [&](const std::string& name) {
    const auto it = col_at.find(name);
    require(it != col_at.end(), "load_csv: required column " + name + " missing from header");
    return it->second;
  };
  const std::size_t target_col = column(schema.target);
  std::optional<std::size_t> env_col;
  if (!schema.environment.empty()) env_col = column(schema.environment);
  std::vector<std::size_t> feature_cols;
  for (const auto& f : schema.features) feature_cols.push_back(column(f));

  Table table;
  for (const auto& f : schema.features) {
    const auto it = schema.categorical.find(f);
    if (it == schema.categorical.end()) {
      table.feature_names.push_back(f);
    } else {
      for (const auto& c : it->second) table.feature_names.push_back(f + "=" + c);
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::string> env_labels;
  std::vector<std::size_t> missing_lines;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    require(cells.size() == header.size(),
            "load_csv: line " + std::to_string(line_no) + " has " +
                std::to_string(cells.size()) + " cells, header has " +
                std::to_string(header.size()));

    bool missing = false;
    auto cell = [&](std::size_t c) {
      const std::string v = detail::trim(cells[c]);
      if (v.empty() || v == "?" || v == "NA") missing = true;
      return v;
    };

    std::vector<double> row;
    row.reserve(table.feature_names.size());
    for (std::size_t fi = 0; fi < schema.features.size(); ++fi) {
      const std::string& fname = schema.features[fi];
      const std::string v = cell(feature_cols[fi]);
      const auto it = schema.categorical.find(fname);
      if (it == schema.categorical.end()) {
        double num = 0.0;
        if (!v.empty() && !missing) {
          require(detail::parse_double(v, num), "load_csv: line " + std::to_string(line_no) +
                                                    " column " + fname + ": not a number: " + v);
        }
        row.push_back(num);
      } else {
        bool found = v.empty();
        for (const auto& c : it->second) {
          row.push_back(v == c ? 1.0 : 0.0);
          found = found || v == c;
        }
        require(found || missing, "load_csv: line " + std::to_string(line_no) + " column " +
                                      fname + ": unknown category: " + v);
      }
    }
    double tv = 0.0;
    {
      const std::string v = cell(target_col);
      if (!v.empty() && !missing) {
        require(detail::parse_double(v, tv), "load_csv: line " + std::to_string(line_no) +
                                                 " column " + schema.target +
                                                 ": not a number: " + v);
      }
    }
    std::string ev;
    if (env_col) ev = cell(*env_col);

    if (missing) {
      missing_lines.push_back(line_no);
      continue;
    }
    rows.push_back(std::move(row));
    targets.push_back(tv);
    env_labels.push_back(ev);
  }

  if (!missing_lines.empty()) {
    std::ostringstream msg;
    msg << "load_csv: missing values on " << missing_lines.size() << " line(s):";
    for (std::size_t i = 0; i < missing_lines.size() && i < 20; ++i) msg << " " << missing_lines[i];
    if (missing_lines.size() > 20) msg << " ...";
    throw std::invalid_argument(msg.str());
  }
  require(!rows.empty(), "load_csv: no data rows in " + path);

  table.X.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.feature_names.size()));
  table.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    table.y[static_cast<Index>(i)] = targets[i];
  }
  table.env_labels = std::move(env_labels);
  return table;
}

// Z-scores every feature column in place. Without given stats the mean and
// population standard deviation are computed from the table itself; constant
// columns keep a unit scale so they pass through unchanged.
inline NormalizationStats normalize(Table& table, const NormalizationStats* given = nullptr) {
  require(table.n() > 0, "normalize: empty table");
  NormalizationStats stats;
  if (given) {
    require(given->mean.size() == table.dim() && given->std.size() == table.dim(),
            "normalize: stats dimension mismatch");
    stats = *given;
  } else {
    stats.mean = table.X.colwise().mean().transpose();
    stats.std.resize(table.dim());
    for (Index j = 0; j < table.dim(); ++j) {
      const double var =
          (table.X.col(j).array() - stats.mean[j]).square().sum() / static_cast<double>(table.n());
      double sd = std::sqrt(var);
      if (sd < 1e-12) sd = 1.0;
      stats.std[j] = sd;
    }
  }
  for (Index j = 0; j < table.dim(); ++j) {
    table.X.col(j) = (table.X.col(j).array() - stats.mean[j]) / stats.std[j];
  }
  return stats;
}

struct SplitResult {
  std::vector<EnvDataset> envs;
  Index leftover = 0;                     // rows no bin or category claimed
  std::vector<std::string> dropped_bins;  // bins or categories that matched nothing
};

// Splits by binning a numeric environment column: bin k covers
// [edges[k], edges[k+1]), the last bin is closed on the right.
inline SplitResult split_environments(const Table& table, const std::vector<double>& edges) {
  require(edges.size() >= 2, "split_environments: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    require(edges[i] > edges[i - 1], "split_environments: bin edges must increase");
  }
  require(table.env_labels.size() == static_cast<std::size_t>(table.n()),
          "split_environments: table has no environment labels");

  const std::size_t bins = edges.size() - 1;
  std::vector<std::vector<Index>> members(bins);
  SplitResult out;
  for (Index i = 0; i < table.n(); ++i) {
    double v = 0.0;
    require(detail::parse_double(table.env_labels[static_cast<std::size_t>(i)], v),
            "split_environments: non-numeric environment label '" +
                table.env_labels[static_cast<std::size_t>(i)] + "' at row " + std::to_string(i));
    std::size_t bin = bins;  // sentinel: leftover
    for (std::size_t k = 0; k < bins; ++k) {
      const bool last = k + 1 == bins;
      if (v >= edges[k] && (v < edges[k + 1] || (last && v == edges[k + 1]))) {
        bin = k;
        break;
      }
    }
    if (bin == bins) {
      ++out.leftover;
    } else {
      members[bin].push_back(i);
    }
  }

  for (std::size_t k = 0; k < bins; ++k) {
    std::ostringstream id;
    id << "[" << detail::fmt_full(edges[k]) << "," << detail::fmt_full(edges[k + 1])
       << (k + 1 == bins ? "]" : ")");
    if (members[k].empty()) {
      out.dropped_bins.push_back(id.str());
      continue;
    }
    EnvDataset env;
    env.env_id = id.str();
    env.X.resize(static_cast<Index>(members[k].size()), table.dim());
    env.y.resize(static_cast<Index>(members[k].size()));
    for (std::size_t i = 0; i < members[k].size(); ++i) {
      env.X.row(static_cast<Index>(i)) = table.X.row(members[k][i]);
      env.y[static_cast<Index>(i)] = table.y[members[k][i]];
    }
    out.envs.push_back(std::move(env));
  }
  return out;
}

// Splits by exact match on a categorical environment column.
inline SplitResult split_environments(const Table& table,
                                      const std::vector<std::string>& categories) {
  require(!categories.empty(), "split_environments: no categories given");
  require(table.env_labels.size() == static_cast<std::size_t>(table.n()),
          "split_environments: table has no environment labels");
  std::map<std::string, std::size_t> order;
  for (std::size_t k = 0; k < categories.size(); ++k) {
    require(order.emplace(categories[k], k).second,
            "split_environments: duplicate category " + categories[k]);
  }

  std::vector<std::vector<Index>> members(categories.size());
  SplitResult out;
  for (Index i = 0; i < table.n(); ++i) {
    const auto it = order.find(table.env_labels[static_cast<std::size_t>(i)]);
    if (it == order.end()) {
      ++out.leftover;
    } else {
      members[it->second].push_back(i);
    }
  }
  for (std::size_t k = 0; k < categories.size(); ++k) {
    if (members[k].empty()) {
      out.dropped_bins.push_back(categories[k]);
      continue;
    }
    EnvDataset env;
    env.env_id = categories[k];
    env.X.resize(static_cast<Index>(members[k].size()), table.dim());
    env.y.resize(static_cast<Index>(members[k].size()));
    for (std::size_t i = 0; i < members[k].size(); ++i) {
      env.X.row(static_cast<Index>(i)) = table.X.row(members[k][i]);
      env.y[static_cast<Index>(i)] = table.y[members[k][i]];
    }
    out.envs.push_back(std::move(env));
  }
  return out;
}

// Writes datasets as env_id,y,x0..x{d-1} rows; full round-trip precision.
inline void write_envs_csv(const std::string& path, const std::vector<EnvDataset>& envs) {
  validate_envs(envs, "write_envs_csv");
  std::ofstream out(path);
  require(out.good(), "write_envs_csv: cannot open " + path);
  out << "env_id,y";
  for (Index j = 0; j < envs.front().dim(); ++j) out << ",x" << j;
  out << "\n";
  for (const auto& e : envs) {
    for (Index i = 0; i < e.n(); ++i) {
      out << e.env_id << "," << detail::fmt_full(e.y[i]);
      for (Index j = 0; j < e.dim(); ++j) out << "," << detail::fmt_full(e.X(i, j));
      out << "\n";
    }
  }
  require(out.good(), "write_envs_csv: write failed for " + path);
}

// Reads the write_envs_csv format back, grouping rows by env_id in order of
// first appearance.
inline std::vector<EnvDataset> read_envs_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_envs_csv: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "read_envs_csv: " + path + " is empty");
  const auto header = detail::split_csv_line(line);
  require(header.size() >= 3 && detail::trim(header[0]) == "env_id" &&
              detail::trim(header[1]) == "y",
          "read_envs_csv: unexpected header in " + path);
  const std::size_t d = header.size() - 2;

  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::vector<double>>> groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(),
            "read_envs_csv: malformed line " + std::to_string(line_no));
    const std::string id = detail::trim(cells[0]);
    std::vector<double> row(d + 1);
    for (std::size_t c = 1; c < cells.size(); ++c) {
      require(detail::parse_double(cells[c], row[c - 1]),
              "read_envs_csv: bad number on line " + std::to_string(line_no));
    }
    if (groups.find(id) == groups.end()) ids.push_back(id);
    groups[id].push_back(std::move(row));
  }
  require(!ids.empty(), "read_envs_csv: no data rows in " + path);

  std::vector<EnvDataset> envs;
  for (const auto& id : ids) {
    const auto& rows = groups[id];
    EnvDataset env;
    env.env_id = id;
    env.X.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
    env.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      env.y[static_cast<Index>(i)] = rows[i][0];
      for (std::size_t j = 0; j < d; ++j) {
        env.X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j + 1];
      }
    }
    envs.push_back(std::move(env));
  }
  return envs;
}

}  // namespace sal
