#pragma once

#include <map>
#include <string>
#include <vector>

namespace cartwin {

/// Flat key-value configuration, `key = value` per line, `#` comments.
/// Keys are dotted (vehicle.mass, drl.gamma, ...). Unknown keys are kept
/// verbatim so one file can configure every subsystem.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  bool has(const std::string& key) const;

  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  /// Comma-separated list of doubles.
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& def) const;

  /// Sorted `key = value` dump (stable across runs).
  std::string dump() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace cartwin
