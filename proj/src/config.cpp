#include "av/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "av/common.hpp"

namespace av {

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  check(ec == std::errc(), "fmt: cannot format double");
  return std::string(buf, ptr);
}

std::string fmt_int(int64_t v) { return std::to_string(v); }
std::string fmt_u64(uint64_t v) { return std::to_string(v); }

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream is(path);
  check(is.good(), "config: cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(lineno) + " is not `key = value`: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    check(!key.empty(), "config: empty key on line " + std::to_string(lineno));
    check(cfg.kv_.count(key) == 0, "config: duplicate key " + key);
    cfg.kv_[key] = value;
  }
  return cfg;
}

std::string Config::get_str(const std::string& key, const std::string& def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

double Config::get_double(const std::string& key, double def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& s = it->second;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc() && ptr == s.data() + s.size(),
        "config: key " + key + " is not a number: " + s);
  return v;
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& s = it->second;
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc() && ptr == s.data() + s.size(),
        "config: key " + key + " is not an integer: " + s);
  return v;
}

uint64_t Config::get_u64(const std::string& key, uint64_t def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& s = it->second;
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  check(ec == std::errc() && ptr == s.data() + s.size(),
        "config: key " + key + " is not an unsigned integer: " + s);
  return v;
}

bool Config::get_bool(const std::string& key, bool def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw Error("config: key " + key + " is not a bool: " + it->second);
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::vector<std::string>& def) const {
  consumed_.insert(key);
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  std::vector<std::string> out;
  std::string cur;
  for (char c : it->second) {
    if (c == ',') {
      std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

void Config::set(const std::string& key, const std::string& value) { kv_[key] = value; }
void Config::set_double(const std::string& key, double value) { kv_[key] = fmt_double(value); }
void Config::set_int(const std::string& key, int64_t value) { kv_[key] = fmt_int(value); }
void Config::set_u64(const std::string& key, uint64_t value) { kv_[key] = fmt_u64(value); }
void Config::set_bool(const std::string& key, bool value) { kv_[key] = value ? "true" : "false"; }

void Config::forbid_unknown() const {
  for (const auto& [key, value] : kv_)
    check(consumed_.count(key) > 0, "config: unknown key " + key);
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [key, value] : kv_) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  }
  return out;
}

uint64_t Config::hash() const { return hash_str(serialize()); }

}  // namespace av
