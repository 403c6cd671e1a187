#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tlgen/tensor.hpp"

namespace tlgen {

/// Flat `key = value` text with `#` comments. Used for model configs, train
/// configs and checkpoint metadata.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;

  template <typename T>
  T get_as(const std::string& key) const {
    return convert<T>(key, get(key));
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) const {
    return has(key) ? get_as<T>(key) : fallback;
  }

  /// Comma-separated list.
  template <typename T>
  std::vector<T> get_list(const std::string& key) const {
    std::vector<T> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(convert<T>(key, trim(item)));
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws InvalidArgument naming any key that no getter has read.
  void require_all_used() const;

  std::string to_text() const;

  static std::string trim(const std::string& s);

 private:
  template <typename T>
  static T convert(const std::string& key, const std::string& raw) {
    if constexpr (std::is_same_v<T, std::string>) {
      return raw;
    } else {
      std::istringstream is(raw);
      T value{};
      is >> value;
      if (is.fail() || !is.eof()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + raw + "'");
      }
      return value;
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace tlgen
