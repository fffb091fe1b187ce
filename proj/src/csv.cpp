#include "tilted/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tilted/errors.hpp"

namespace tilted {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw StructuralError("csv: row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_text(path, str()); }

void ExperimentReport::add(std::string config_id, std::string variant, std::string cell, std::uint64_t seed,
                           std::string metric, double value) {
  rows.push_back({std::move(config_id), std::move(variant), std::move(cell), seed, std::move(metric), value});
}

void ExperimentReport::append(const ExperimentReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

std::vector<double> ExperimentReport::values(const std::string& metric, const std::string& variant,
                                             const std::string& cell) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    if (!variant.empty() && r.variant != variant) continue;
    if (!cell.empty() && r.cell != cell) continue;
    out.push_back(r.value);
  }
  return out;
}

std::string ExperimentReport::csv() const {
  CsvTable t({"config_id", "variant", "cell", "seed", "metric", "value"});
  for (const auto& r : rows) {
    t.add_row({r.config_id, r.variant, r.cell, std::to_string(r.seed), r.metric, format_number(r.value)});
  }
  return t.str();
}

void ExperimentReport::write(const std::string& path) const { write_text(path, csv()); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
  if (!out) throw UsageError("write failed for '" + path + "'");
}

}  // namespace tilted
