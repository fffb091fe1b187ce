#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tilted {

// Shortest round-trip text for a double (%.17g); "nan"/"inf" spelled out.
std::string format_number(double v);

// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string str() const;
  void write(const std::string& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// One row per completed cell:
// config_id,variant,cell,seed,metric,value
struct ExperimentRow {
  std::string config_id;
  std::string variant;
  std::string cell;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;

  void add(std::string config_id, std::string variant, std::string cell, std::uint64_t seed,
           std::string metric, double value);
  void append(const ExperimentReport& other);
  // Values of rows matching every non-empty filter, in row order.
  std::vector<double> values(const std::string& metric, const std::string& variant = "",
                             const std::string& cell = "") const;
  std::string csv() const;
  void write(const std::string& path) const;
};

void write_text(const std::string& path, const std::string& text);

}  // namespace tilted
