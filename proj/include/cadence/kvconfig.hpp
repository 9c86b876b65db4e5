#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cadence {

/// Line-oriented "key = value" configuration. '#' starts a comment, blank
/// lines are ignored, keys are dotted paths (e.g. "attack.flood.kind").
/// Used for synthetic traffic profiles, network models and experiment runs.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& get(const std::string& key) const;  // throws if missing
  std::string get_or(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double def) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t def) const;
  std::uint64_t get_u64_or(const std::string& key, std::uint64_t def) const;

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  /// Distinct middle segments of keys shaped "<prefix>.<name>.*", in
  /// first-appearance-in-sorted-map order. Lets configs declare groups like
  /// attack.flood.* / attack.scan.* without a schema.
  std::vector<std::string> group_names(const std::string& prefix) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cadence
