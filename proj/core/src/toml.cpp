#include "spl/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "spl/common.hpp"

namespace spl::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Drops a trailing comment, respecting quoted strings.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char ch : key) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.'))
      return false;
  }
  return key.front() != '.' && key.back() != '.';
}

std::string parse_string(std::string_view s, int line) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') fail(line, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char ch = s[i];
    if (ch == '\\') {
      if (i + 2 >= s.size()) fail(line, "dangling escape");
      char e = s[++i];
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(line, std::string("unsupported escape \\") + e);
      }
    } else {
      out.push_back(ch);
    }
  }
  return out;
}

std::optional<double> parse_number(std::string_view s, bool& is_integer) {
  std::string cleaned;
  for (char ch : s) {
    if (ch != '_') cleaned.push_back(ch);
  }
  if (cleaned == "inf" || cleaned == "+inf") return std::numeric_limits<double>::infinity();
  if (cleaned == "-inf") return -std::numeric_limits<double>::infinity();
  std::string_view v = cleaned;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  is_integer = v.find_first_of(".eE") == std::string_view::npos;
  if (is_integer) {
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
    if (ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
    return static_cast<double>(i);
  }
  double d = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
  return d;
}

std::vector<std::string_view> split_array_items(std::string_view body, int line) {
  std::vector<std::string_view> items;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char ch = body[i];
    if (ch == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
    if (!in_string && (ch == '[' || ch == '{')) fail(line, "nested arrays and inline tables are not supported");
    if (!in_string && ch == ',') {
      items.push_back(trim(body.substr(start, i - start)));
      start = i + 1;
    }
  }
  auto last = trim(body.substr(start));
  if (!last.empty()) items.push_back(last);
  for (auto item : items) {
    if (item.empty()) fail(line, "empty array element");
  }
  return items;
}

Value parse_value(std::string_view s, int line) {
  s = trim(s);
  if (s.empty()) fail(line, "missing value");
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') return parse_string(s, line);
  if (s.front() == '[') {
    if (s.back() != ']') fail(line, "unterminated array");
    auto items = split_array_items(s.substr(1, s.size() - 2), line);
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (auto item : items) out.push_back(parse_string(item, line));
      return out;
    }
    std::vector<double> out;
    for (auto item : items) {
      bool is_int = false;
      auto num = parse_number(item, is_int);
      if (!num) fail(line, "bad array element '" + std::string(item) + "'");
      out.push_back(*num);
    }
    return out;
  }
  if (s.front() == '{') fail(line, "inline tables are not supported");
  bool is_int = false;
  auto num = parse_number(s, is_int);
  if (!num) fail(line, "bad value '" + std::string(s) + "'");
  if (is_int) return static_cast<std::int64_t>(*num);
  return *num;
}

std::string type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    case 4: return "number array";
    default: return "string array";
  }
}

}  // namespace

void Table::set(const std::string& key, Value v) { values_[key] = std::move(v); }

const Value& Table::at(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, "missing key '" + key + "'");
  return it->second;
}

double Table::number(const std::string& key) const {
  const Value& v = at(key);
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw Error(ErrorCode::ConfigError, "key '" + key + "' is a " + type_name(v) + ", expected a number");
}

double Table::number_or(const std::string& key, double fallback) const {
  return contains(key) ? number(key) : fallback;
}

std::int64_t Table::integer(const std::string& key) const {
  const Value& v = at(key);
  if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
  throw Error(ErrorCode::ConfigError, "key '" + key + "' is a " + type_name(v) + ", expected an integer");
}

std::int64_t Table::integer_or(const std::string& key, std::int64_t fallback) const {
  return contains(key) ? integer(key) : fallback;
}

bool Table::boolean_or(const std::string& key, bool fallback) const {
  if (!contains(key)) return fallback;
  const Value& v = at(key);
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw Error(ErrorCode::ConfigError, "key '" + key + "' is a " + type_name(v) + ", expected a boolean");
}

std::string Table::string_or(const std::string& key, const std::string& fallback) const {
  if (!contains(key)) return fallback;
  const Value& v = at(key);
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorCode::ConfigError, "key '" + key + "' is a " + type_name(v) + ", expected a string");
}

std::vector<double> Table::numbers(const std::string& key) const {
  const Value& v = at(key);
  if (auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  throw Error(ErrorCode::ConfigError, "key '" + key + "' is a " + type_name(v) + ", expected a number array");
}

std::vector<double> Table::numbers_or(const std::string& key, const std::vector<double>& fallback) const {
  return contains(key) ? numbers(key) : fallback;
}

Document parse(std::string_view text) {
  Document doc;
  Table* current = &doc.root;
  std::string prefix;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    auto line = trim(strip_comment(raw));
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.starts_with("[[")) {
      if (!line.ends_with("]]")) fail(line_no, "malformed array-of-tables header");
      std::string name(trim(line.substr(2, line.size() - 4)));
      if (!valid_key(name)) fail(line_no, "bad table name '" + name + "'");
      auto& arr = doc.table_arrays[name];
      arr.emplace_back();
      current = &arr.back();
      prefix.clear();
    } else if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed table header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      if (!valid_key(name)) fail(line_no, "bad table name '" + name + "'");
      current = &doc.root;
      prefix = name + ".";
    } else {
      auto eq = line.find('=');
      if (eq == std::string_view::npos) fail(line_no, "expected key = value");
      std::string key(trim(line.substr(0, eq)));
      if (!valid_key(key)) fail(line_no, "bad key '" + key + "'");
      std::string full = prefix + key;
      if (current->contains(full)) fail(line_no, "duplicate key '" + full + "'");
      current->set(full, parse_value(line.substr(eq + 1), line_no));
    }
    if (end == text.size()) break;
  }
  return doc;
}

Document parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
}

}  // namespace spl::toml
