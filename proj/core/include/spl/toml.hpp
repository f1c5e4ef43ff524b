// Reader for the TOML subset used by config and scene-spec files: [tables],
// [[arrays.of.tables]], key = value with booleans, integers, floats, basic
// strings and flat arrays of numbers or strings. Inline tables, dates and
// multi-line strings are rejected with ConfigError.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spl::toml {

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>,
                           std::vector<std::string>>;

// Flat key -> value map. Keys of nested tables are dotted ("vehicle.r1").
class Table {
 public:
  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, Value>& values() const { return values_; }
  void set(const std::string& key, Value v);

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers_or(const std::string& key, const std::vector<double>& fallback) const;

 private:
  const Value& at(const std::string& key) const;
  std::map<std::string, Value> values_;
};

struct Document {
  Table root;
  std::map<std::string, std::vector<Table>> table_arrays;
};

Document parse(std::string_view text);
Document parse_file(const std::filesystem::path& path);

}  // namespace spl::toml
