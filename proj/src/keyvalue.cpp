#include "scogait/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "scogait/errors.hpp"

namespace scogait {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

KeyValues parse_keyvalues(std::string_view text, const std::string& origin) {
  KeyValues kv;
  std::vector<std::string> problems;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (body.front() == '[') {
      if (body.back() != ']') {
        problems.push_back(where + ": malformed section header");
        continue;
      }
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(body.substr(0, eq));
    if (key.empty()) {
      problems.push_back(where + ": empty key");
      continue;
    }
    kv[section.empty() ? key : section + "." + key] = trim(body.substr(eq + 1));
  }
  if (!problems.empty()) throw ConfigError(problems);
  return kv;
}

KeyValues read_keyvalues(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError({"cannot read config file " + file.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_keyvalues(ss.str(), file.string());
}

std::string format_keyvalues(const KeyValues& kv) {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      sections[""].emplace_back(k, v);
    } else {
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
    }
  }
  std::string out;
  for (const auto& [name, entries] : sections) {
    if (!name.empty()) out += (out.empty() ? "" : "\n") + std::string("[") + name + "]\n";
    for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  }
  return out;
}

void write_keyvalues(const KeyValues& kv, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << format_keyvalues(kv);
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& overrides) {
  std::vector<std::string> problems;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      problems.push_back("override '" + o + "' is not key=value");
      continue;
    }
    kv[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
  }
  if (!problems.empty()) throw ConfigError(problems);
}

const std::string* KeyValueReader::raw(const std::string& key) {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  used_.insert(key);
  return &it->second;
}

void KeyValueReader::get(const std::string& key, int& out) {
  if (const auto* v = raw(key); v && !parse_number(*v, out)) {
    problems_.push_back(key + ": expected an integer, got '" + *v + "'");
  }
}

void KeyValueReader::get(const std::string& key, std::uint64_t& out) {
  if (const auto* v = raw(key); v && !parse_number(*v, out)) {
    problems_.push_back(key + ": expected a non-negative integer, got '" + *v + "'");
  }
}

void KeyValueReader::get(const std::string& key, double& out) {
  if (const auto* v = raw(key); v && !parse_number(*v, out)) {
    problems_.push_back(key + ": expected a number, got '" + *v + "'");
  }
}

void KeyValueReader::get(const std::string& key, bool& out) {
  const auto* v = raw(key);
  if (!v) return;
  if (*v == "true" || *v == "1" || *v == "yes") {
    out = true;
  } else if (*v == "false" || *v == "0" || *v == "no") {
    out = false;
  } else {
    problems_.push_back(key + ": expected true/false, got '" + *v + "'");
  }
}

void KeyValueReader::get(const std::string& key, std::string& out) {
  if (const auto* v = raw(key)) out = *v;
}

void KeyValueReader::get(const std::string& key, std::vector<int>& out) {
  const auto* v = raw(key);
  if (!v) return;
  std::vector<int> parsed;
  for (const auto& item : split_list(*v)) {
    int x;
    if (!parse_number(item, x)) {
      problems_.push_back(key + ": expected a comma-separated integer list, got '" + *v + "'");
      return;
    }
    parsed.push_back(x);
  }
  out = parsed;
}

void KeyValueReader::get(const std::string& key, std::vector<double>& out) {
  const auto* v = raw(key);
  if (!v) return;
  std::vector<double> parsed;
  for (const auto& item : split_list(*v)) {
    double x;
    if (!parse_number(item, x)) {
      problems_.push_back(key + ": expected a comma-separated number list, got '" + *v + "'");
      return;
    }
    parsed.push_back(x);
  }
  out = parsed;
}

void KeyValueReader::get(const std::string& key, std::vector<std::string>& out) {
  if (const auto* v = raw(key)) out = split_list(*v);
}

std::vector<std::string> KeyValueReader::problems() const {
  std::vector<std::string> all = problems_;
  for (const auto& [k, v] : kv_) {
    if (!used_.count(k)) all.push_back("unknown key '" + k + "'");
  }
  return all;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace scogait
