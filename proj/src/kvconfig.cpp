#include "cadence/kvconfig.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cadence {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_string(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": empty key");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

const std::string& KvConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw std::runtime_error("missing config key: " + key);
  }
  return it->second;
}

std::string KvConfig::get_or(const std::string& key,
                             const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

double KvConfig::get_double(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t pos = 0;
  double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::runtime_error("bad number for " + key);
  return d;
}

double KvConfig::get_double_or(const std::string& key, double def) const {
  return has(key) ? get_double(key) : def;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
  const std::string& v = get(key);
  std::size_t pos = 0;
  std::int64_t i = std::stoll(v, &pos);
  if (pos != v.size()) throw std::runtime_error("bad integer for " + key);
  return i;
}

std::int64_t KvConfig::get_int_or(const std::string& key,
                                  std::int64_t def) const {
  return has(key) ? get_int(key) : def;
}

std::uint64_t KvConfig::get_u64_or(const std::string& key,
                                   std::uint64_t def) const {
  if (!has(key)) return def;
  const std::string& v = get(key);
  std::size_t pos = 0;
  std::uint64_t u = std::stoull(v, &pos);
  if (pos != v.size()) throw std::runtime_error("bad integer for " + key);
  return u;
}

std::vector<std::string> KvConfig::group_names(
    const std::string& prefix) const {
  std::vector<std::string> names;
  const std::string pfx = prefix + ".";
  for (const auto& [key, _] : values_) {
    if (key.rfind(pfx, 0) != 0) continue;
    const auto dot = key.find('.', pfx.size());
    if (dot == std::string::npos) continue;
    std::string name = key.substr(pfx.size(), dot - pfx.size());
    if (names.empty() || names.back() != name) {
      bool seen = false;
      for (const auto& n : names) seen = seen || n == name;
      if (!seen) names.push_back(name);
    }
  }
  return names;
}

}  // namespace cadence
