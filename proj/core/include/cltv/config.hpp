#ifndef CLTV_CONFIG_HPP
#define CLTV_CONFIG_HPP

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cltv {

/// Raised for malformed config text and for typed lookups that fail.
/// The message always names the offending key or line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Flat key=value configuration with dotted section names, e.g.
 *
 *   env.family = gridworld
 *   env.slip = 0.1        # comment lines start with '#'
 *   cltv.lambda = 0.8
 *
 * Keys are unique; duplicates are a parse error. The canonical text (keys
 * sorted, single '=' separator) feeds the config hash that run outputs embed.
 */
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  uint64_t get_uint64(const std::string& key, uint64_t fallback) const;

  /// Comma separated lists, e.g. "32,32" or "0.2,0.4,0.6".
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  std::vector<std::string> keys() const;

  /// Keys present in the file but never read by any getter. Used by config
  /// validation to reject typos with a field-level message.
  std::vector<std::string> unread_keys() const;

  std::string canonical_text() const;

  /// FNV-1a of the canonical text, printed as 0x%016llx in output files.
  uint64_t hash() const;
  std::string hash_hex() const;

 private:
  const std::string* find(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> read_;
};

}  // namespace cltv

#endif  // CLTV_CONFIG_HPP
