#pragma once

// Minimal TOML subset: [tables], [[arrays of tables]], key = value with
// strings, integers, floats, booleans and flat arrays, plus # comments.
// Parse errors carry 1-based line numbers.

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tetrecon::toml
{
    class Value;
    using Array = std::vector<Value>;
    struct Table;

    class Value
    {
    public:
        Value() = default;
        explicit Value(std::string s) : data_(std::move(s)) {}
        explicit Value(double d) : data_(d) {}
        explicit Value(std::int64_t i) : data_(i) {}
        explicit Value(bool b) : data_(b) {}
        explicit Value(Array a) : data_(std::move(a)) {}

        bool is_string() const { return std::holds_alternative<std::string>(data_); }
        bool is_number() const
        {
            return std::holds_alternative<double>(data_) || std::holds_alternative<std::int64_t>(data_);
        }
        bool is_bool() const { return std::holds_alternative<bool>(data_); }
        bool is_array() const { return std::holds_alternative<Array>(data_); }

        const std::string & as_string() const;
        double as_double() const;
        std::int64_t as_int() const;
        bool as_bool() const;
        const Array & as_array() const;
        std::vector<double> as_double_array() const;

    private:
        std::variant<std::monostate, std::string, double, std::int64_t, bool, Array> data_;
    };

    struct Table
    {
        std::map<std::string, Value> values;
        std::map<std::string, Table> tables;
        std::map<std::string, std::vector<Table>> table_arrays;

        bool has(const std::string & key) const { return values.count(key) > 0; }
        const Value & at(const std::string & key) const;

        std::string get_string(const std::string & key, const std::string & fallback) const;
        double get_double(const std::string & key, double fallback) const;
        std::int64_t get_int(const std::string & key, std::int64_t fallback) const;
        bool get_bool(const std::string & key, bool fallback) const;
    };

    struct parse_error : std::runtime_error
    {
        int line;
        parse_error(int line_number, const std::string & msg)
            : std::runtime_error("TOML parse error at line " + std::to_string(line_number) + ": " + msg),
              line(line_number)
        {
        }
    };

    Table parse(const std::string & text);
    Table parse_file(const std::string & path);
}
