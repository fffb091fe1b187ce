#pragma once

// Flat, sectioned key=value configuration:
//
//   # comment
//   [train]
//   steps = 250
//   lr_grid = 0.01
//
// Keys are addressed as "section.key". Every subcommand declares a schema;
// keys outside it are rejected.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tilted {

struct ConfigOption {
  std::string key;           // "section.key"
  std::string default_value;
  std::string help;
  std::string flag;          // optional command-line flag name without dashes
};

using ConfigSchema = std::vector<ConfigOption>;

// Raw parsed file: "section.key" -> value, in file order for messages.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source);
std::map<std::string, std::string> load_config_file(const std::string& path);

class Settings {
 public:
  Settings() = default;
  explicit Settings(const ConfigSchema& schema);

  // Applies file values; throws UsageError on keys missing from the schema.
  void apply(const std::map<std::string, std::string>& values, const std::string& source);
  void set(const std::string& key, const std::string& value);

  const std::string& get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma separated
  std::vector<std::int64_t> get_ints(const std::string& key) const;

  // Sections in schema order, every key with its current value.
  std::string dump(bool with_help = true) const;

 private:
  ConfigSchema schema_;
  std::map<std::string, std::string> values_;
};

// "0:4" expands to 0,1,2,3,4; "1,5,9" is a list.
std::vector<std::int64_t> parse_int_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace tilted
