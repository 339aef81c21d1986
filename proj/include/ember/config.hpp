#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ember/common.hpp"

namespace ember {

/// Sectioned key-value configuration:
///   [section]           # or [section.sub]
///   key = value         # '#' starts a comment
/// Keys are addressed as "section.key". Section order is preserved so
/// repeated groups like [embedded.*] keep their file order.
class Config {
 public:
  static Config parse_string(const std::string& text, const std::string& origin = "<string>") {
    Config cfg;
    cfg.raw_ = text;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']' || t.size() < 3) {
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header '" +
                            t + "'");
        }
        section = trim(t.substr(1, t.size() - 2));
        bool seen = false;
        for (const auto& s : cfg.sections_) seen = seen || s == section;
        if (!seen) cfg.sections_.push_back(section);
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value', got '" +
                          t + "'");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
      }
      if (section.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                          "' appears before any [section]");
      }
      cfg.values_[section + "." + key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
  }

  const std::string& raw() const { return raw_; }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  /// Sections whose name starts with the prefix, in file order.
  std::vector<std::string> sections_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : sections_) {
      if (s.rfind(prefix, 0) == 0) out.push_back(s);
    }
    return out;
  }

  std::string get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      throw ConfigError("missing required config key [" + section_of(key) + "]." +
                        name_of(key));
    }
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return to_double(key, get_string(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? to_double(key, get_string(key)) : fallback;
  }

  std::size_t get_size(const std::string& key) const { return to_size(key, get_string(key)); }
  std::size_t get_size(const std::string& key, std::size_t fallback) const {
    return has(key) ? to_size(key, get_string(key)) : fallback;
  }

  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    return static_cast<std::uint64_t>(to_size(key, get_string(key)));
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key [" + section_of(key) + "]." + name_of(key) +
                      " must be a boolean, got '" + v + "'");
  }

  /// Comma- or whitespace-separated list.
  std::vector<std::string> get_list(const std::string& key) const {
    std::string v = get_string(key);
    for (auto& c : v) {
      if (c == ',') c = ' ';
    }
    std::istringstream in(v);
    std::vector<std::string> out;
    std::string item;
    while (in >> item) out.push_back(item);
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : get_list(key)) out.push_back(to_double(key, item));
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string section_of(const std::string& key) {
    const auto dot = key.rfind('.');
    return dot == std::string::npos ? "" : key.substr(0, dot);
  }
  static std::string name_of(const std::string& key) {
    const auto dot = key.rfind('.');
    return dot == std::string::npos ? key : key.substr(dot + 1);
  }

  double to_double(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section_of(key) + "]." + name_of(key) +
                        " must be a number, got '" + v + "'");
    }
  }

  std::size_t to_size(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const unsigned long long u = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return static_cast<std::size_t>(u);
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section_of(key) + "]." + name_of(key) +
                        " must be a nonnegative integer, got '" + v + "'");
    }
  }

  std::string raw_;
  std::map<std::string, std::string> values_;
  std::vector<std::string> sections_;
};

}  // namespace ember
