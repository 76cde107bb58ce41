#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace csiloc {

/// Flat key=value settings. Blank lines and lines starting with '#' are ignored.
/// Later assignments override earlier ones, which is how command-line overrides
/// are layered on top of a file.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(const std::set<std::string>& known) const;

  /// Canonical "key=value\n" listing in key order; hashing it gives a config hash.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
  std::string origin_ = "<config>";
};

/// Shortest decimal text that reads back to exactly `value`.
std::string format_double(double value);

/// 64-bit FNV-1a, used for config hashes in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace csiloc
