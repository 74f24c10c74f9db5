#include "sharpefolio/toml.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "sharpefolio/error.hpp"

namespace sharpefolio::toml {

std::string_view Value::type_name() const {
    switch (data_.index()) {
        case 0: return "string";
        case 1: return "integer";
        case 2: return "float";
        case 3: return "boolean";
        case 4: return "array";
        default: return "table";
    }
}

namespace {

bool is_bare_key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

class Parser {
public:
    Parser(std::string_view text, std::string source) : s_(text), source_(std::move(source)) {}

    Table run() {
        Table root;
        root.defined = true;
        Table* current = &root;
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                current = header(root);
            } else {
                key_value(*current);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(fmt::format("{}:{}: {}", source_, line_, msg));
    }

    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }
    char get() {
        const char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_spaces() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#')
            while (!at_end() && peek() != '\n') ++pos_;
    }
    void skip_blank_lines() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (peek() == '\r') ++pos_;
            if (peek() == '\n')
                get();
            else
                break;
        }
    }
    // Whitespace, comments and newlines, as allowed inside arrays.
    void skip_array_space() {
        while (!at_end()) {
            skip_spaces();
            skip_comment();
            if (peek() == '\n' || peek() == '\r')
                get();
            else
                break;
        }
    }
    void end_of_line() {
        skip_spaces();
        skip_comment();
        if (peek() == '\r') ++pos_;
        if (at_end()) return;
        if (peek() != '\n') fail(fmt::format("unexpected '{}' after value", peek()));
        get();
    }

    std::string key_part() {
        skip_spaces();
        if (peek() == '"') return basic_string();
        if (peek() == '\'') return literal_string();
        const std::size_t start = pos_;
        while (!at_end() && is_bare_key_char(peek())) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> dotted_key() {
        std::vector<std::string> parts{key_part()};
        skip_spaces();
        while (peek() == '.') {
            ++pos_;
            parts.push_back(key_part());
            skip_spaces();
        }
        return parts;
    }

    Table& descend(Table& from, const std::string& key) {
        auto it = from.entries.find(key);
        if (it == from.entries.end())
            it = from.entries.emplace(key, Value(std::make_shared<Table>(), line_)).first;
        if (!it->second.is_table()) fail(fmt::format("key '{}' is already a {}", key, it->second.type_name()));
        return it->second.as_table();
    }

    Table* header(Table& root) {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        const auto parts = dotted_key();
        if (peek() != ']') fail("expected ']' to close the table header");
        ++pos_;
        Table* t = &root;
        for (const auto& p : parts) t = &descend(*t, p);
        if (t->defined) fail(fmt::format("table [{}] defined twice", fmt::join(parts, ".")));
        t->defined = true;
        return t;
    }

    void key_value(Table& table) {
        const auto parts = dotted_key();
        if (peek() != '=') fail(fmt::format("expected '=' after key '{}'", fmt::join(parts, ".")));
        ++pos_;
        skip_spaces();
        Value v = value();
        Table* t = &table;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = &descend(*t, parts[i]);
        if (t->entries.count(parts.back())) fail(fmt::format("duplicate key '{}'", fmt::join(parts, ".")));
        t->entries.emplace(parts.back(), std::move(v));
    }

    Value value() {
        const int line = line_;
        const char c = peek();
        if (c == '"') return {basic_string(), line};
        if (c == '\'') return {literal_string(), line};
        if (c == '[') return array();
        if (c == '{') return inline_table();
        if (s_.substr(pos_, 4) == "true" && !is_bare_key_char(s_.size() > pos_ + 4 ? s_[pos_ + 4] : ' ')) {
            pos_ += 4;
            return {true, line};
        }
        if (s_.substr(pos_, 5) == "false" && !is_bare_key_char(s_.size() > pos_ + 5 ? s_[pos_ + 5] : ' ')) {
            pos_ += 5;
            return {false, line};
        }
        return scalar_token();
    }

    std::string basic_string() {
        ++pos_;
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) fail("unterminated escape");
            const char e = s_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case 'b': out += '\b'; break;
                case 'f': out += '\f'; break;
                case 'u': out += unicode_escape(); break;
                default: fail(fmt::format("unknown escape '\\{}'", e));
            }
        }
        return out;
    }

    std::string unicode_escape() {
        if (pos_ + 4 > s_.size()) fail("short \\u escape");
        unsigned cp = 0;
        const auto r = std::from_chars(s_.data() + pos_, s_.data() + pos_ + 4, cp, 16);
        if (r.ptr != s_.data() + pos_ + 4) fail("bad \\u escape");
        pos_ += 4;
        std::string out;
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
        return out;
    }

    std::string literal_string() {
        ++pos_;
        const std::size_t start = pos_;
        while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
        if (peek() != '\'') fail("unterminated literal string");
        std::string out(s_.substr(start, pos_ - start));
        ++pos_;
        return out;
    }

    Value array() {
        const int line = line_;
        ++pos_;
        Value::Array items;
        while (true) {
            skip_array_space();
            if (peek() == ']') {
                ++pos_;
                break;
            }
            items.push_back(value());
            skip_array_space();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == ']') {
                ++pos_;
                break;
            }
            fail("expected ',' or ']' in array");
        }
        return {std::move(items), line};
    }

    Value inline_table() {
        const int line = line_;
        ++pos_;
        auto t = std::make_shared<Table>();
        t->defined = true;
        skip_spaces();
        if (peek() == '}') {
            ++pos_;
            return {t, line};
        }
        while (true) {
            key_value(*t);
            skip_spaces();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            if (peek() == '}') {
                ++pos_;
                break;
            }
            fail("expected ',' or '}' in inline table");
        }
        return {t, line};
    }

    Value scalar_token() {
        const int line = line_;
        const std::size_t start = pos_;
        while (!at_end() && (is_bare_key_char(peek()) || peek() == '.' || peek() == '+' || peek() == ':')) ++pos_;
        const std::string tok(s_.substr(start, pos_ - start));
        if (tok.empty()) fail(fmt::format("expected a value, found '{}'", peek()));
        // Local date: YYYY-MM-DD.
        if (tok.size() == 10 && tok[4] == '-' && tok[7] == '-' &&
            std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == '-'; }))
            return {tok, line};
        if (!std::isdigit(static_cast<unsigned char>(tok[0])) && tok[0] != '+' && tok[0] != '-')
            fail(fmt::format("invalid value '{}' (strings must be quoted)", tok));
        std::string digits;
        for (std::size_t i = 0; i < tok.size(); ++i) {
            if (tok[i] == '_') {
                if (i == 0 || i + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[i - 1])) ||
                    !std::isdigit(static_cast<unsigned char>(tok[i + 1])))
                    fail(fmt::format("misplaced '_' in number '{}'", tok));
                continue;
            }
            digits += tok[i];
        }
        const bool is_float = digits.find_first_of(".eE") != std::string::npos;
        const char* b = digits.data() + (digits[0] == '+' ? 1 : 0);
        const char* e = digits.data() + digits.size();
        if (is_float) {
            double v = 0;
            const auto r = std::from_chars(b, e, v);
            if (r.ec != std::errc() || r.ptr != e) fail(fmt::format("invalid number '{}'", tok));
            return {v, line};
        }
        std::int64_t v = 0;
        const auto r = std::from_chars(b, e, v);
        if (r.ec != std::errc() || r.ptr != e) fail(fmt::format("invalid value '{}' (strings must be quoted)", tok));
        return {v, line};
    }

    std::string_view s_;
    std::string source_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

}  // namespace

Table parse(std::string_view text, const std::string& source) { return Parser(text, source).run(); }

Table parse_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
}

}  // namespace sharpefolio::toml
