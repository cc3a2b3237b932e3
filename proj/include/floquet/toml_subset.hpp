#pragma once

// Reader for the small TOML subset used by scenario files: [table] and
// [dotted.table] headers, bare or dotted keys, basic and literal strings,
// integers, floats, booleans, and (nested, multi-line) arrays. Produces an
// ordered JSON tree so that validation and the manifest echo share one
// representation.

#include <nlohmann/json.hpp>

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "floquet/error.hpp"

namespace floquet::toml {

using Value = nlohmann::ordered_json;

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Value parse() {
        Value root = Value::object();
        Value* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                ++pos_;
                skip_inline_space();
                auto path = parse_key_path();
                skip_inline_space();
                expect(']');
                table = &open_table(root, path, true);
            } else {
                auto path = parse_key_path();
                skip_inline_space();
                expect('=');
                skip_inline_space();
                Value v = parse_value();
                Value* target = table;
                for (std::size_t k = 0; k + 1 < path.size(); ++k) target = &open_table(*target, {path[k]}, false);
                if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
                (*target)[path.back()] = std::move(v);
            }
            end_of_line();
        }
        return root;
    }

private:
    bool eof() const { return pos_ >= text_.size(); }
    char peek() const { return eof() ? '\0' : text_[pos_]; }

    int line() const {
        int n = 1;
        for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) n += text_[i] == '\n';
        return n;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line()) + ": " + msg);
    }

    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_inline_space() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (!eof()) {
            skip_inline_space();
            skip_comment();
            if (peek() == '\r' || peek() == '\n') {
                ++pos_;
                continue;
            }
            break;
        }
    }

    /// Whitespace, comments and newlines inside arrays.
    void skip_array_space() {
        while (!eof()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') ++pos_;
            else if (c == '#') skip_comment();
            else break;
        }
    }

    void end_of_line() {
        skip_inline_space();
        skip_comment();
        if (eof()) return;
        if (peek() == '\r') ++pos_;
        if (peek() != '\n') fail("unexpected trailing characters");
        ++pos_;
    }

    std::string parse_key() {
        if (peek() == '"') return parse_basic_string();
        if (peek() == '\'') return parse_literal_string();
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(text_.substr(start, pos_ - start));
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path{parse_key()};
        skip_inline_space();
        while (peek() == '.') {
            ++pos_;
            skip_inline_space();
            path.push_back(parse_key());
            skip_inline_space();
        }
        return path;
    }

    Value& open_table(Value& root, const std::vector<std::string>& path, bool header) {
        Value* t = &root;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto& key = path[k];
            if (!t->contains(key)) {
                (*t)[key] = Value::object();
            } else if (!(*t)[key].is_object()) {
                fail("key '" + key + "' is not a table");
            } else if (header && k + 1 == path.size() && defined_.count(joined(path))) {
                fail("table [" + joined(path) + "] defined twice");
            }
            t = &(*t)[key];
        }
        if (header) defined_.insert(joined(path));
        return *t;
    }

    static std::string joined(const std::vector<std::string>& path) {
        std::string s;
        for (const auto& p : path) s += (s.empty() ? "" : ".") + p;
        return s;
    }

    Value parse_value() {
        const char c = peek();
        if (c == '"') return parse_basic_string();
        if (c == '\'') return parse_literal_string();
        if (c == '[') return parse_array();
        if (text_.substr(pos_, 4) == "true") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "false") {
            pos_ += 5;
            return false;
        }
        return parse_number();
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = text_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated escape");
            switch (text_[pos_++]) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            default: fail("unsupported escape sequence");
            }
        }
        return out;
    }

    std::string parse_literal_string() {
        expect('\'');
        const std::size_t start = pos_;
        while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
        if (peek() != '\'') fail("unterminated string");
        std::string out(text_.substr(start, pos_ - start));
        ++pos_;
        return out;
    }

    Value parse_array() {
        expect('[');
        Value arr = Value::array();
        skip_array_space();
        while (peek() != ']') {
            arr.push_back(parse_value());
            skip_array_space();
            if (peek() == ',') {
                ++pos_;
                skip_array_space();
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
        ++pos_;
        return arr;
    }

    Value parse_number() {
        const std::size_t start = pos_;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-'
                          || peek() == '.' || peek() == '_'))
            ++pos_;
        std::string token;
        for (char c : text_.substr(start, pos_ - start))
            if (c != '_') token += c;
        if (token.empty()) fail("expected a value");
        const std::string body = (token[0] == '+' || token[0] == '-') ? token.substr(1) : token;
        const double sign = token[0] == '-' ? -1.0 : 1.0;
        if (body == "inf") return sign * std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        const bool is_float = token.find_first_of(".eE") != std::string::npos;
        const char* first = token.data() + (token[0] == '+' ? 1 : 0);
        const char* last = token.data() + token.size();
        if (!is_float) {
            long long v = 0;
            auto [p, ec] = std::from_chars(first, last, v);
            if (ec == std::errc() && p == last) return v;
            fail("invalid integer '" + token + "'");
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec == std::errc() && p == last) return v;
        fail("invalid value '" + token + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::set<std::string> defined_;
};

inline Value parse(std::string_view text) { return Parser(text).parse(); }

} // namespace floquet::toml
