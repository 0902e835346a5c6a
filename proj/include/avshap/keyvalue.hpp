#pragma once

// Reader and writer for the TOML-style configuration text: `[section]`
// headers, `key = value` lines, `#` comments. Values are booleans, integers,
// floats (including inf / -inf / nan), double-quoted strings and
// (possibly nested, possibly multi-line) arrays. The format is documented in
// docs/config.md.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace avshap {

class KvValue {
 public:
  using Array = std::vector<KvValue>;

  KvValue() : v_(false) {}
  KvValue(bool b) : v_(b) {}
  KvValue(std::int64_t i) : v_(i) {}
  KvValue(int i) : v_(static_cast<std::int64_t>(i)) {}
  KvValue(double d) : v_(d) {}
  KvValue(std::string s) : v_(std::move(s)) {}
  KvValue(const char* s) : v_(std::string(s)) {}
  KvValue(Array a) : v_(std::move(a)) {}

  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_number() const { return is_int() || std::holds_alternative<double>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }

  // Accessors throw ConfigError naming `what` on a type mismatch.
  bool as_bool(std::string_view what) const;
  std::int64_t as_int(std::string_view what) const;
  std::uint64_t as_uint(std::string_view what) const;
  double as_double(std::string_view what) const;
  const std::string& as_string(std::string_view what) const;
  const Array& as_array(std::string_view what) const;

  std::vector<double> as_double_vector(std::string_view what) const;
  std::vector<std::string> as_string_vector(std::string_view what) const;

  std::string to_text() const;

  bool operator==(const KvValue&) const = default;

 private:
  std::variant<bool, std::int64_t, double, std::string, Array> v_;
};

class KvDocument {
 public:
  using Table = std::map<std::string, KvValue>;

  // Keys before the first header live in the section named "".
  const Table* section(const std::string& name) const;
  const KvValue* find(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& name) const { return section(name) != nullptr; }

  void add_section(const std::string& name);
  void set(const std::string& section, const std::string& key, KvValue value);
  const std::map<std::string, Table>& sections() const { return sections_; }

  std::string to_text() const;

 private:
  std::map<std::string, Table> sections_;
};

KvDocument parse_kv(std::string_view text);
KvDocument load_kv_file(const std::string& path);

// Shortest decimal that parses back to the same binary64; inf, -inf, nan
// for the special values.
std::string format_double(double d);

}  // namespace avshap
