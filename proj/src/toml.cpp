#include "tetrecon/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tetrecon::toml
{
    const std::string & Value::as_string() const
    {
        if (!is_string())
        {
            throw std::runtime_error("TOML value is not a string");
        }
        return std::get<std::string>(data_);
    }

    double Value::as_double() const
    {
        if (std::holds_alternative<double>(data_))
        {
            return std::get<double>(data_);
        }
        if (std::holds_alternative<std::int64_t>(data_))
        {
            return static_cast<double>(std::get<std::int64_t>(data_));
        }
        throw std::runtime_error("TOML value is not a number");
    }

    std::int64_t Value::as_int() const
    {
        if (std::holds_alternative<std::int64_t>(data_))
        {
            return std::get<std::int64_t>(data_);
        }
        throw std::runtime_error("TOML value is not an integer");
    }

    bool Value::as_bool() const
    {
        if (!is_bool())
        {
            throw std::runtime_error("TOML value is not a boolean");
        }
        return std::get<bool>(data_);
    }

    const Array & Value::as_array() const
    {
        if (!is_array())
        {
            throw std::runtime_error("TOML value is not an array");
        }
        return std::get<Array>(data_);
    }

    std::vector<double> Value::as_double_array() const
    {
        const Array & arr = as_array();
        std::vector<double> out;
        out.reserve(arr.size());
        for (const Value & v : arr)
        {
            out.push_back(v.as_double());
        }
        return out;
    }

    const Value & Table::at(const std::string & key) const
    {
        auto it = values.find(key);
        if (it == values.end())
        {
            throw std::runtime_error("missing TOML key: " + key);
        }
        return it->second;
    }

    std::string Table::get_string(const std::string & key, const std::string & fallback) const
    {
        return has(key) ? at(key).as_string() : fallback;
    }

    double Table::get_double(const std::string & key, double fallback) const
    {
        return has(key) ? at(key).as_double() : fallback;
    }

    std::int64_t Table::get_int(const std::string & key, std::int64_t fallback) const
    {
        return has(key) ? at(key).as_int() : fallback;
    }

    bool Table::get_bool(const std::string & key, bool fallback) const
    {
        return has(key) ? at(key).as_bool() : fallback;
    }

    namespace
    {
        struct Cursor
        {
            const std::string & text;
            size_t pos = 0;
            int line = 1;
        };

        void skip_ws(Cursor & c, bool stop_at_newline = true)
        {
            while (c.pos < c.text.size())
            {
                const char ch = c.text[c.pos];
                if (ch == ' ' || ch == '\t' || ch == '\r')
                {
                    ++c.pos;
                }
                else if (ch == '#')
                {
                    while (c.pos < c.text.size() && c.text[c.pos] != '\n')
                    {
                        ++c.pos;
                    }
                }
                else if (ch == '\n' && !stop_at_newline)
                {
                    ++c.line;
                    ++c.pos;
                }
                else
                {
                    break;
                }
            }
        }

        bool at_line_end(Cursor & c)
        {
            skip_ws(c);
            return c.pos >= c.text.size() || c.text[c.pos] == '\n';
        }

        void expect_line_end(Cursor & c)
        {
            if (!at_line_end(c))
            {
                throw parse_error(c.line, "unexpected trailing characters");
            }
            if (c.pos < c.text.size())
            {
                ++c.line;
                ++c.pos;
            }
        }

        std::string parse_bare_key(Cursor & c)
        {
            const size_t start = c.pos;
            while (c.pos < c.text.size() &&
                   (std::isalnum(static_cast<unsigned char>(c.text[c.pos])) || c.text[c.pos] == '_' ||
                    c.text[c.pos] == '-'))
            {
                ++c.pos;
            }
            if (c.pos == start)
            {
                throw parse_error(c.line, "expected a key");
            }
            return c.text.substr(start, c.pos - start);
        }

        std::string parse_string(Cursor & c)
        {
            ++c.pos; // opening quote
            std::string out;
            while (c.pos < c.text.size())
            {
                const char ch = c.text[c.pos];
                if (ch == '"')
                {
                    ++c.pos;
                    return out;
                }
                if (ch == '\n')
                {
                    throw parse_error(c.line, "unterminated string");
                }
                if (ch == '\\')
                {
                    ++c.pos;
                    if (c.pos >= c.text.size())
                    {
                        throw parse_error(c.line, "dangling escape");
                    }
                    switch (c.text[c.pos])
                    {
                        case '"': out.push_back('"'); break;
                        case '\\': out.push_back('\\'); break;
                        case 'n': out.push_back('\n'); break;
                        case 't': out.push_back('\t'); break;
                        default:
                            throw parse_error(c.line, "unsupported escape sequence");
                    }
                    ++c.pos;
                }
                else
                {
                    out.push_back(ch);
                    ++c.pos;
                }
            }
            throw parse_error(c.line, "unterminated string");
        }

        Value parse_value(Cursor & c);

        Value parse_array(Cursor & c)
        {
            ++c.pos; // '['
            Array arr;
            while (true)
            {
                skip_ws(c, /*stop_at_newline=*/false);
                if (c.pos >= c.text.size())
                {
                    throw parse_error(c.line, "unterminated array");
                }
                if (c.text[c.pos] == ']')
                {
                    ++c.pos;
                    return Value(std::move(arr));
                }
                arr.push_back(parse_value(c));
                skip_ws(c, /*stop_at_newline=*/false);
                if (c.pos < c.text.size() && c.text[c.pos] == ',')
                {
                    ++c.pos;
                }
                else if (c.pos < c.text.size() && c.text[c.pos] != ']')
                {
                    throw parse_error(c.line, "expected ',' or ']' in array");
                }
            }
        }

        Value parse_value(Cursor & c)
        {
            const char ch = c.text[c.pos];
            if (ch == '"')
            {
                return Value(parse_string(c));
            }
            if (ch == '[')
            {
                return parse_array(c);
            }
            if (c.text.compare(c.pos, 4, "true") == 0)
            {
                c.pos += 4;
                return Value(true);
            }
            if (c.text.compare(c.pos, 5, "false") == 0)
            {
                c.pos += 5;
                return Value(false);
            }
            // Number: integer unless it carries a '.', exponent or inf/nan.
            const size_t start = c.pos;
            while (c.pos < c.text.size() &&
                   (std::isalnum(static_cast<unsigned char>(c.text[c.pos])) || c.text[c.pos] == '+' ||
                    c.text[c.pos] == '-' || c.text[c.pos] == '.' || c.text[c.pos] == '_'))
            {
                ++c.pos;
            }
            std::string tok = c.text.substr(start, c.pos - start);
            if (tok.empty())
            {
                throw parse_error(c.line, "expected a value");
            }
            tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
            const bool is_float = tok.find_first_of(".eE") != std::string::npos ||
                                  tok.find("inf") != std::string::npos ||
                                  tok.find("nan") != std::string::npos;
            try
            {
                if (is_float)
                {
                    size_t used = 0;
                    const double d = std::stod(tok, &used);
                    if (used != tok.size())
                    {
                        throw parse_error(c.line, "malformed number: " + tok);
                    }
                    return Value(d);
                }
                size_t used = 0;
                const std::int64_t i = std::stoll(tok, &used);
                if (used != tok.size())
                {
                    throw parse_error(c.line, "malformed number: " + tok);
                }
                return Value(i);
            }
            catch (const parse_error &)
            {
                throw;
            }
            catch (const std::exception &)
            {
                throw parse_error(c.line, "malformed value: " + tok);
            }
        }

        Table * descend(Table & root, Cursor & c, std::vector<std::string> & path_out)
        {
            Table * current = &root;
            while (true)
            {
                const std::string key = parse_bare_key(c);
                path_out.push_back(key);
                if (c.pos < c.text.size() && c.text[c.pos] == '.')
                {
                    ++c.pos;
                    current = &current->tables[key];
                    // A dotted path through an array of tables addresses its last element.
                    continue;
                }
                return current;
            }
        }
    }

    Table parse(const std::string & text)
    {
        Table root;
        Cursor c { text };
        Table * current = &root;

        while (c.pos < text.size())
        {
            skip_ws(c);
            if (c.pos >= text.size())
            {
                break;
            }
            const char ch = text[c.pos];
            if (ch == '\n')
            {
                ++c.line;
                ++c.pos;
                continue;
            }
            if (ch == '[')
            {
                const bool is_array = c.pos + 1 < text.size() && text[c.pos + 1] == '[';
                c.pos += is_array ? 2 : 1;
                std::vector<std::string> path;
                Table * parent = descend(root, c, path);
                const std::string & leaf = path.back();
                for (int i = 0; i < (is_array ? 2 : 1); ++i)
                {
                    if (c.pos >= text.size() || text[c.pos] != ']')
                    {
                        throw parse_error(c.line, "unterminated table header");
                    }
                    ++c.pos;
                }
                if (is_array)
                {
                    parent->table_arrays[leaf].emplace_back();
                    current = &parent->table_arrays[leaf].back();
                }
                else
                {
                    if (parent->table_arrays.count(leaf) || parent->values.count(leaf))
                    {
                        throw parse_error(c.line, "redefinition of " + leaf);
                    }
                    current = &parent->tables[leaf];
                }
                expect_line_end(c);
                continue;
            }

            const std::string key = parse_bare_key(c);
            skip_ws(c);
            if (c.pos >= text.size() || text[c.pos] != '=')
            {
                throw parse_error(c.line, "expected '=' after key '" + key + "'");
            }
            ++c.pos;
            skip_ws(c);
            if (c.pos >= text.size() || text[c.pos] == '\n')
            {
                throw parse_error(c.line, "missing value for key '" + key + "'");
            }
            if (current->values.count(key))
            {
                throw parse_error(c.line, "duplicate key '" + key + "'");
            }
            current->values.emplace(key, parse_value(c));
            expect_line_end(c);
        }
        return root;
    }

    Table parse_file(const std::string & path)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw std::runtime_error("cannot open TOML file: " + path);
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }
}
