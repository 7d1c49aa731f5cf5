#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cbdi::toml {

/// Minimal TOML subset: [section] headers, dotted keys, strings, numbers,
/// booleans and flat arrays. Line numbers are kept for error messages and
/// every key records whether a consumer looked at it, so unknown keys can be
/// rejected after binding.
struct Value {
    std::variant<std::string, double, bool, std::vector<double>,
                 std::vector<std::string>>
        v;
    int line = 0;
    mutable bool consumed = false;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_number_array() const { return std::holds_alternative<std::vector<double>>(v); }
};

class Document {
public:
    static Document parse(const std::string& text);
    static Document parse_file(const std::string& path);

    bool has_section(const std::string& s) const;
    bool has(const std::string& section, const std::string& key) const;

    /// Typed getters mark the key consumed; missing key or wrong type raises
    /// config_error naming section.key (and the line for type errors).
    std::string get_string(const std::string& s, const std::string& k) const;
    double get_number(const std::string& s, const std::string& k) const;
    bool get_bool(const std::string& s, const std::string& k) const;
    std::vector<double> get_number_array(const std::string& s, const std::string& k) const;

    std::optional<std::string> opt_string(const std::string& s, const std::string& k) const;
    std::optional<double> opt_number(const std::string& s, const std::string& k) const;
    std::optional<bool> opt_bool(const std::string& s, const std::string& k) const;
    std::optional<std::vector<double>> opt_number_array(const std::string& s,
                                                        const std::string& k) const;

    /// Keys nobody consumed, as "section.key (line N)" strings.
    std::vector<std::string> unconsumed() const;

    const std::map<std::string, std::map<std::string, Value>>& sections() const {
        return sections_;
    }

private:
    const Value* find(const std::string& s, const std::string& k) const;
    const Value& require(const std::string& s, const std::string& k) const;

    std::map<std::string, std::map<std::string, Value>> sections_;
};

} // namespace cbdi::toml
