#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cyclepose/common.hpp"

namespace cyclepose::config {

/// Minimal TOML-style run-config reader: `[section]` headers and
/// `key = value` lines with string, bool, number, and flat-array values.
class Table {
 public:
  using Value = std::variant<int64_t, double, bool, std::string, std::vector<double>,
                             std::vector<std::string>>;

  static Table parseFile(const std::filesystem::path& path);
  static Table parseString(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;

  int64_t getInt(const std::string& section, const std::string& key, int64_t def) const;
  double getDouble(const std::string& section, const std::string& key, double def) const;
  bool getBool(const std::string& section, const std::string& key, bool def) const;
  std::string getString(const std::string& section, const std::string& key,
                        const std::string& def) const;
  std::vector<double> getDoubles(const std::string& section, const std::string& key) const;
  std::vector<std::string> getStrings(const std::string& section, const std::string& key) const;

  void set(const std::string& section, const std::string& key, Value v);

  /// FNV-1a hash over the canonicalized key/value dump; identifies a run.
  uint64_t contentHash() const;
  std::string dump() const;

 private:
  const Value* find(const std::string& section, const std::string& key) const;
  std::map<std::string, std::map<std::string, Value>> sections_;
};

}  // namespace cyclepose::config
