#include "cbdi/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "cbdi/errors.hpp"

namespace cbdi::toml {

namespace {

std::string strip(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Removes a trailing comment outside of string literals.
std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_str = !in_str;
        if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
}

bool parse_number(const std::string& t, double& out) {
    const char* b = t.data();
    const char* e = t.data() + t.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

Value parse_value(const std::string& raw, int line) {
    Value val;
    val.line = line;
    const std::string t = strip(raw);
    if (t.empty()) throw config_error("empty value at line " + std::to_string(line));

    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"')
            throw config_error("unterminated string at line " + std::to_string(line));
        val.v = t.substr(1, t.size() - 2);
        return val;
    }
    if (t == "true") {
        val.v = true;
        return val;
    }
    if (t == "false") {
        val.v = false;
        return val;
    }
    if (t.front() == '[') {
        if (t.back() != ']')
            throw config_error("unterminated array at line " + std::to_string(line));
        const std::string inner = t.substr(1, t.size() - 2);
        std::vector<double> nums;
        std::vector<std::string> strs;
        bool is_str = false;
        std::string item;
        std::istringstream is(inner);
        while (std::getline(is, item, ',')) {
            const std::string it = strip(item);
            if (it.empty()) continue;
            if (it.front() == '"') {
                is_str = true;
                strs.push_back(it.substr(1, it.size() - 2));
            } else {
                double d;
                if (!parse_number(it, d))
                    throw config_error("bad array element '" + it + "' at line " +
                                       std::to_string(line));
                nums.push_back(d);
            }
        }
        if (is_str)
            val.v = strs;
        else
            val.v = nums;
        return val;
    }
    if (t == "inf") {
        val.v = std::numeric_limits<double>::infinity();
        return val;
    }
    double d;
    if (parse_number(t, d)) {
        val.v = d;
        return val;
    }
    throw config_error("cannot parse value '" + t + "' at line " + std::to_string(line));
}

} // namespace

Document Document::parse(const std::string& text) {
    Document doc;
    std::istringstream is(text);
    std::string raw_line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, raw_line)) {
        ++lineno;
        const std::string line = strip(strip_comment(raw_line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("malformed section header at line " +
                                   std::to_string(lineno));
            section = strip(line.substr(1, line.size() - 2));
            if (section.empty())
                throw config_error("empty section name at line " + std::to_string(lineno));
            doc.sections_[section]; // section may legitimately stay empty
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("expected key = value at line " + std::to_string(lineno));
        const std::string key = strip(line.substr(0, eq));
        if (key.empty())
            throw config_error("empty key at line " + std::to_string(lineno));
        if (section.empty())
            throw config_error("key '" + key + "' outside any section at line " +
                               std::to_string(lineno));
        Value v = parse_value(line.substr(eq + 1), lineno);
        if (!doc.sections_[section].emplace(key, std::move(v)).second)
            throw config_error("duplicate key '" + section + "." + key + "' at line " +
                               std::to_string(lineno));
    }
    return doc;
}

Document Document::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open config file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse(buf.str());
}

bool Document::has_section(const std::string& s) const { return sections_.count(s) > 0; }

bool Document::has(const std::string& s, const std::string& k) const {
    return find(s, k) != nullptr;
}

const Value* Document::find(const std::string& s, const std::string& k) const {
    auto si = sections_.find(s);
    if (si == sections_.end()) return nullptr;
    auto ki = si->second.find(k);
    if (ki == si->second.end()) return nullptr;
    return &ki->second;
}

const Value& Document::require(const std::string& s, const std::string& k) const {
    const Value* v = find(s, k);
    if (!v) throw config_error("missing required key '" + s + "." + k + "'");
    return *v;
}

std::string Document::get_string(const std::string& s, const std::string& k) const {
    const Value& v = require(s, k);
    if (!v.is_string())
        throw config_error("'" + s + "." + k + "' must be a string (line " +
                           std::to_string(v.line) + ")");
    v.consumed = true;
    return std::get<std::string>(v.v);
}

double Document::get_number(const std::string& s, const std::string& k) const {
    const Value& v = require(s, k);
    if (!v.is_number())
        throw config_error("'" + s + "." + k + "' must be a number (line " +
                           std::to_string(v.line) + ")");
    v.consumed = true;
    return std::get<double>(v.v);
}

bool Document::get_bool(const std::string& s, const std::string& k) const {
    const Value& v = require(s, k);
    if (!v.is_bool())
        throw config_error("'" + s + "." + k + "' must be a boolean (line " +
                           std::to_string(v.line) + ")");
    v.consumed = true;
    return std::get<bool>(v.v);
}

std::vector<double> Document::get_number_array(const std::string& s,
                                               const std::string& k) const {
    const Value& v = require(s, k);
    if (!v.is_number_array())
        throw config_error("'" + s + "." + k + "' must be a number array (line " +
                           std::to_string(v.line) + ")");
    v.consumed = true;
    return std::get<std::vector<double>>(v.v);
}

std::optional<std::string> Document::opt_string(const std::string& s,
                                                const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return get_string(s, k);
}

std::optional<double> Document::opt_number(const std::string& s,
                                           const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return get_number(s, k);
}

std::optional<bool> Document::opt_bool(const std::string& s, const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return get_bool(s, k);
}

std::optional<std::vector<double>> Document::opt_number_array(const std::string& s,
                                                              const std::string& k) const {
    if (!has(s, k)) return std::nullopt;
    return get_number_array(s, k);
}

std::vector<std::string> Document::unconsumed() const {
    std::vector<std::string> out;
    for (const auto& [sec, keys] : sections_)
        for (const auto& [key, val] : keys)
            if (!val.consumed)
                out.push_back(sec + "." + key + " (line " + std::to_string(val.line) + ")");
    return out;
}

} // namespace cbdi::toml
