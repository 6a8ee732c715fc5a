#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cartwin {

/// CSV writer with an optional `# schema: <name>` comment line.
/// Doubles are printed with %.17g so that a read-back reproduces the
/// stored value bit for bit.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& schema,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open csv for writing: " + path);
    if (!schema.empty()) out_ << "# schema: " << schema << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ",";
      out_ << columns[i];
    }
    out_ << "\n";
    n_cols_ = columns.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != n_cols_) {
      throw std::invalid_argument("csv row width mismatch");
    }
    char buf[40];
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ",";
      if (std::isnan(values[i])) {
        // empty cell for missing channels (e.g. lidar off-tick)
      } else {
        std::snprintf(buf, sizeof(buf), "%.17g", values[i]);
        out_ << buf;
      }
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t n_cols_ = 0;
};

/// Minimal CSV reader for numeric traces written by CsvWriter.
/// Empty cells come back as NaN.
struct CsvTable {
  std::string schema;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  }

  std::vector<double> column(const std::string& name) const {
    const int idx = column_index(name);
    if (idx < 0) throw std::invalid_argument("csv column not found: " + name);
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[idx]);
    return v;
  }
};

CsvTable read_csv(const std::string& path);

}  // namespace cartwin
