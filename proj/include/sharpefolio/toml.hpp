#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Parser for the TOML subset used by run configs: [table] and [a.b] headers,
// dotted and quoted keys, basic and literal strings, integers, floats,
// booleans, arrays (multi-line, trailing comma) and inline tables. Bare
// ISO dates (2011-01-01) are read as strings. Arrays of tables, multi-line
// strings and datetimes with times are rejected.
namespace sharpefolio::toml {

struct Table;

class Value {
public:
    using Array = std::vector<Value>;
    using Storage = std::variant<std::string, std::int64_t, double, bool, Array, std::shared_ptr<Table>>;

    Value() = default;
    Value(Storage data, int line) : data_(std::move(data)), line_(line) {}

    bool is_string() const { return std::holds_alternative<std::string>(data_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(data_); }
    bool is_float() const { return std::holds_alternative<double>(data_); }
    bool is_number() const { return is_integer() || is_float(); }
    bool is_bool() const { return std::holds_alternative<bool>(data_); }
    bool is_array() const { return std::holds_alternative<Array>(data_); }
    bool is_table() const { return std::holds_alternative<std::shared_ptr<Table>>(data_); }

    const std::string& as_string() const { return std::get<std::string>(data_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
    // Integers widen to double.
    double as_number() const { return is_integer() ? static_cast<double>(as_integer()) : std::get<double>(data_); }
    bool as_bool() const { return std::get<bool>(data_); }
    const Array& as_array() const { return std::get<Array>(data_); }
    const Table& as_table() const { return *std::get<std::shared_ptr<Table>>(data_); }
    Table& as_table() { return *std::get<std::shared_ptr<Table>>(data_); }

    std::string_view type_name() const;
    int line() const { return line_; }

private:
    Storage data_;
    int line_ = 0;
};

struct Table {
    std::map<std::string, Value> entries;
    bool defined = false;  // opened explicitly by a [header]

    const Value* find(const std::string& key) const {
        const auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    }
};

// Throws ConfigError("<source>:<line>: ...") on malformed input.
Table parse(std::string_view text, const std::string& source = "<config>");
Table parse_file(const std::filesystem::path& path);

}  // namespace sharpefolio::toml
