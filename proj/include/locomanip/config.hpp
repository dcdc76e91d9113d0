#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

namespace locomanip {

// key=value run configuration. Every option has a compiled-in default (the
// field initializers of the various *Config structs); a file only lists
// overrides. Keys are marked consumed as they are read so that a run can
// reject keys it does not understand.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  long long get_int64(const std::string& key, long long def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_vec(const std::string& key, const std::vector<double>& def) const;
  std::vector<int> get_vec_int(const std::string& key, const std::vector<int>& def) const;

  // Throws ConfigError naming every key that was never read.
  void check_fully_consumed() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace locomanip
