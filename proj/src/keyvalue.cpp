#include "avshap/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "avshap/error.hpp"

namespace avshap {
namespace {

[[noreturn]] void type_error(std::string_view what, std::string_view expected) {
  throw ConfigError(std::string(what) + ": expected " + std::string(expected));
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

  KvValue parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    return parse_scalar();
  }

  void expect_end() {
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing text '" + std::string(s_.substr(pos_)) + "'");
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + msg);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' ||
                                s_[pos_] == '\r')) {
      ++pos_;
    }
  }

  KvValue parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unknown escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return KvValue(std::move(out));
  }

  KvValue parse_array() {
    ++pos_;
    KvValue::Array items;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return KvValue(std::move(items));
    }
    while (true) {
      items.push_back(parse_value());
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return KvValue(std::move(items));
  }

  KvValue parse_scalar() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' &&
           s_[pos_] != '\t' && s_[pos_] != '\n' && s_[pos_] != '\r') {
      ++pos_;
    }
    const std::string_view tok = s_.substr(start, pos_ - start);
    if (tok == "true") return KvValue(true);
    if (tok == "false") return KvValue(false);
    if (tok == "inf" || tok == "+inf") return KvValue(std::numeric_limits<double>::infinity());
    if (tok == "-inf") return KvValue(-std::numeric_limits<double>::infinity());
    if (tok == "nan") return KvValue(std::numeric_limits<double>::quiet_NaN());

    std::string_view digits = tok;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    const bool integral = !digits.empty() &&
                          digits.find_first_not_of("-0123456789") == std::string_view::npos;
    if (integral) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), i);
      if (ec == std::errc() && p == digits.data() + digits.size()) return KvValue(i);
    }
    double d = 0.0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), d);
    if (digits.empty() || ec != std::errc() || p != digits.data() + digits.size()) {
      fail("cannot parse value '" + std::string(tok) + "'");
    }
    return KvValue(d);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_string && c == '\\') {
      ++i;
      continue;
    }
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

// Net bracket depth outside of strings.
int bracket_balance(std::string_view s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string && c == '\\') {
      ++i;
      continue;
    }
    if (c == '"') in_string = !in_string;
    if (in_string) continue;
    if (c == '[') ++depth;
    if (c == ']') --depth;
  }
  return depth;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace

bool KvValue::as_bool(std::string_view what) const {
  if (!is_bool()) type_error(what, "a boolean");
  return std::get<bool>(v_);
}

std::int64_t KvValue::as_int(std::string_view what) const {
  if (!is_int()) type_error(what, "an integer");
  return std::get<std::int64_t>(v_);
}

std::uint64_t KvValue::as_uint(std::string_view what) const {
  const auto i = as_int(what);
  if (i < 0) type_error(what, "a non-negative integer");
  return static_cast<std::uint64_t>(i);
}

double KvValue::as_double(std::string_view what) const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(v_));
  if (!std::holds_alternative<double>(v_)) type_error(what, "a number");
  return std::get<double>(v_);
}

const std::string& KvValue::as_string(std::string_view what) const {
  if (!is_string()) type_error(what, "a string");
  return std::get<std::string>(v_);
}

const KvValue::Array& KvValue::as_array(std::string_view what) const {
  if (!is_array()) type_error(what, "an array");
  return std::get<Array>(v_);
}

std::vector<double> KvValue::as_double_vector(std::string_view what) const {
  std::vector<double> out;
  for (const auto& v : as_array(what)) out.push_back(v.as_double(what));
  return out;
}

std::vector<std::string> KvValue::as_string_vector(std::string_view what) const {
  std::vector<std::string> out;
  for (const auto& v : as_array(what)) out.push_back(v.as_string(what));
  return out;
}

std::string KvValue::to_text() const {
  if (is_bool()) return std::get<bool>(v_) ? "true" : "false";
  if (is_int()) return std::to_string(std::get<std::int64_t>(v_));
  if (std::holds_alternative<double>(v_)) {
    const double d = std::get<double>(v_);
    std::string s = format_double(d);
    // Keep floats distinguishable from integers on re-read.
    if (std::isfinite(d) && s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  }
  if (is_string()) return quote(std::get<std::string>(v_));
  std::string out = "[";
  const auto& a = std::get<Array>(v_);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += ", ";
    out += a[i].to_text();
  }
  return out + "]";
}

const KvDocument::Table* KvDocument::section(const std::string& name) const {
  auto it = sections_.find(name);
  return it == sections_.end() ? nullptr : &it->second;
}

const KvValue* KvDocument::find(const std::string& section_name, const std::string& key) const {
  const auto* t = section(section_name);
  if (!t) return nullptr;
  auto it = t->find(key);
  return it == t->end() ? nullptr : &it->second;
}

void KvDocument::add_section(const std::string& name) { sections_[name]; }

void KvDocument::set(const std::string& section_name, const std::string& key, KvValue value) {
  sections_[section_name][key] = std::move(value);
}

std::string KvDocument::to_text() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [name, table] : sections_) {
    if (!name.empty()) {
      if (!first) out << '\n';
      out << '[' << name << "]\n";
    }
    for (const auto& [k, v] : table) out << k << " = " << v.to_text() << '\n';
    first = false;
  }
  return out.str();
}

KvDocument parse_kv(std::string_view text) {
  KvDocument doc;
  std::string current;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[' && line.find('=') == std::string::npos) {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      current = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_name(current)) {
        throw ConfigError("config line " + std::to_string(line_no) + ": bad section name '" +
                          current + "'");
      }
      doc.add_section(current);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_name(key)) {
      throw ConfigError("config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    }
    std::string value_text = trim(std::string_view(line).substr(eq + 1));
    const std::size_t start_line = line_no;
    while (bracket_balance(value_text) > 0 && std::getline(in, raw)) {
      ++line_no;
      value_text += ' ';
      value_text += trim(strip_comment(raw));
    }
    if (doc.find(current, key)) {
      throw ConfigError("config line " + std::to_string(start_line) + ": duplicate key '" + key +
                        "'");
    }
    Parser p(value_text, start_line);
    KvValue v = p.parse_value();
    p.expect_end();
    doc.set(current, key, std::move(v));
  }
  return doc;
}

KvDocument load_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_kv(ss.str());
}

std::string format_double(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

}  // namespace avshap
