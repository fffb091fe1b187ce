#include "tilted/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tilted/errors.hpp"

namespace tilted {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0' || errno == ERANGE) {
    throw UsageError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

std::int64_t to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || *end != '\0' || errno == ERANGE) {
    throw UsageError("config key '" + key + "': expected an integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> out;
  std::stringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw UsageError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(where + ": empty key");
    if (section.empty()) throw UsageError(where + ": key '" + key + "' outside of a section");
    const std::string full = section + "." + key;
    if (out.count(full)) throw UsageError(where + ": duplicate key '" + full + "'");
    out[full] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

Settings::Settings(const ConfigSchema& schema) : schema_(schema) {
  for (const auto& o : schema_) values_[o.key] = o.default_value;
}

void Settings::apply(const std::map<std::string, std::string>& values, const std::string& source) {
  for (const auto& [k, v] : values) {
    if (!values_.count(k)) throw UsageError(source + ": unknown config key '" + k + "'");
    values_[k] = v;
  }
}

void Settings::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw UsageError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& Settings::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw StructuralError("settings: key '" + key + "' is not in the schema");
  return it->second;
}

double Settings::get_double(const std::string& key) const { return to_double(key, get_string(key)); }

std::int64_t Settings::get_int(const std::string& key) const { return to_int(key, get_string(key)); }

std::uint64_t Settings::get_uint(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) throw UsageError("config key '" + key + "' must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool Settings::get_bool(const std::string& key) const {
  std::string v = trim(get_string(key));
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("config key '" + key + "': expected a boolean, got '" + get_string(key) + "'");
}

std::vector<double> Settings::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_commas(get_string(key))) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::int64_t> Settings::get_ints(const std::string& key) const {
  try {
    return parse_int_list(get_string(key));
  } catch (const UsageError& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

std::string Settings::dump(bool with_help) const {
  std::ostringstream out;
  std::string section;
  for (const auto& o : schema_) {
    const auto dot = o.key.find('.');
    const std::string sec = o.key.substr(0, dot), name = o.key.substr(dot + 1);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    if (with_help && !o.help.empty()) out << "# " << o.help << (o.flag.empty() ? "" : " (--" + o.flag + ")") << '\n';
    out << name << " = " << values_.at(o.key) << '\n';
  }
  return out.str();
}

std::vector<std::int64_t> parse_int_list(const std::string& text) {
  std::vector<std::int64_t> out;
  for (const auto& item : split_commas(text)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      out.push_back(to_int("list", item));
      continue;
    }
    const std::int64_t a = to_int("list", item.substr(0, colon)), b = to_int("list", item.substr(colon + 1));
    if (b < a) throw UsageError("bad range '" + item + "'");
    for (std::int64_t v = a; v <= b; ++v) out.push_back(v);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_commas(text)) out.push_back(to_double("list", item));
  return out;
}

}  // namespace tilted
