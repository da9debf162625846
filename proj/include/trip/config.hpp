#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trip::config {

/// `key = value` lines; `#` starts a comment. Later keys override earlier ones.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source = "config");
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback = "") const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated

  /// Throws ConfigInvalid naming the first key not in `known`.
  void require_known(const std::vector<std::string>& known) const;
  void set(const std::string& key, const std::string& value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string source_;
};

}  // namespace trip::config
