#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace av {

// Flat key-value configuration. Grammar (see docs/FORMATS.md): one
// `key = value` pair per line, `#` starts a comment, keys are dotted
// lowercase words. Typed getters mark keys as consumed; commands call
// forbid_unknown() afterwards so typos fail loudly.
class Config {
public:
  Config() = default;
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  // comma-separated list
  std::vector<std::string> get_list(const std::string& key,
                                    const std::vector<std::string>& def) const;

  void set(const std::string& key, const std::string& value);
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, int64_t value);
  void set_u64(const std::string& key, uint64_t value);
  void set_bool(const std::string& key, bool value);

  // Throws if any key was never consumed by a getter, naming the key.
  void forbid_unknown() const;

  // Sorted `key = value` lines; parse(serialize()) round-trips exactly.
  std::string serialize() const;
  uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> consumed_;
};

// Locale-independent shortest-round-trip formatting; used for every number
// that lands in a CSV or config so reruns are byte-identical.
std::string fmt_double(double v);
std::string fmt_int(int64_t v);
std::string fmt_u64(uint64_t v);

}  // namespace av
