#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace scogait {

// Flattened view of a sectioned text file:
//
//   # comment
//   seed = 3
//   [train]
//   lr0 = 0.1
//
// yields {"seed": "3", "train.lr0": "0.1"}.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_keyvalues(std::string_view text, const std::string& origin = "<text>");
KeyValues read_keyvalues(const std::filesystem::path& file);
std::string format_keyvalues(const KeyValues& kv);
void write_keyvalues(const KeyValues& kv, const std::filesystem::path& file);

// Applies "a.b=value" overrides on top of `kv`.
void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides);

// Typed lookups that leave the destination untouched when the key is absent
// and record a problem (instead of throwing) when the value does not parse.
// Keys that were never looked up are reported as unknown.
class KeyValueReader {
 public:
  explicit KeyValueReader(const KeyValues& kv) : kv_(kv) {}

  void get(const std::string& key, int& out);
  void get(const std::string& key, std::uint64_t& out);
  void get(const std::string& key, double& out);
  void get(const std::string& key, bool& out);
  void get(const std::string& key, std::string& out);
  void get(const std::string& key, std::vector<int>& out);
  void get(const std::string& key, std::vector<double>& out);
  void get(const std::string& key, std::vector<std::string>& out);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  // Marks a key as consumed and returns its raw value, if present.
  const std::string* raw(const std::string& key);
  void problem(std::string message) { problems_.push_back(std::move(message)); }

  // Parse problems plus one entry per unknown key.
  std::vector<std::string> problems() const;

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
  std::vector<std::string> problems_;
};

std::vector<std::string> split_list(const std::string& s, char sep = ',');
std::string join_list(const std::vector<int>& v);
std::string join_list(const std::vector<double>& v);
std::string format_double(double v);

}  // namespace scogait
