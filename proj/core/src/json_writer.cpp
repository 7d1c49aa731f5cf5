#include "cbdi/json_writer.hpp"

#include <cmath>
#include <cstdio>

namespace cbdi {

std::string JsonWriter::format_double(double v) {
    if (std::isnan(v)) return "null";
    if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void JsonWriter::pre_value() {
    if (pending_key_) {
        pending_key_ = false;
        return;
    }
    if (!needs_comma_.empty()) {
        if (needs_comma_.back()) out_ << ',';
        needs_comma_.back() = true;
    }
}

void JsonWriter::value_escaped(const std::string& s) {
    out_ << '"';
    for (char c : s) {
        switch (c) {
            case '"': out_ << "\\\""; break;
            case '\\': out_ << "\\\\"; break;
            case '\n': out_ << "\\n"; break;
            case '\r': out_ << "\\r"; break;
            case '\t': out_ << "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out_ << buf;
                } else {
                    out_ << c;
                }
        }
    }
    out_ << '"';
}

JsonWriter& JsonWriter::begin_object() {
    pre_value();
    out_ << '{';
    needs_comma_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_object() {
    out_ << '}';
    needs_comma_.pop_back();
    return *this;
}

JsonWriter& JsonWriter::begin_array() {
    pre_value();
    out_ << '[';
    needs_comma_.push_back(false);
    return *this;
}

JsonWriter& JsonWriter::end_array() {
    out_ << ']';
    needs_comma_.pop_back();
    return *this;
}

JsonWriter& JsonWriter::key(const std::string& k) {
    if (!needs_comma_.empty()) {
        if (needs_comma_.back()) out_ << ',';
        needs_comma_.back() = true;
    }
    value_escaped(k);
    out_ << ':';
    pending_key_ = true;
    return *this;
}

JsonWriter& JsonWriter::value(double v) {
    pre_value();
    out_ << format_double(v);
    return *this;
}

JsonWriter& JsonWriter::value(long v) {
    pre_value();
    out_ << v;
    return *this;
}

JsonWriter& JsonWriter::value(unsigned long long v) {
    pre_value();
    out_ << v;
    return *this;
}

JsonWriter& JsonWriter::value(bool v) {
    pre_value();
    out_ << (v ? "true" : "false");
    return *this;
}

JsonWriter& JsonWriter::value(const std::string& v) {
    pre_value();
    value_escaped(v);
    return *this;
}

JsonWriter& JsonWriter::null() {
    pre_value();
    out_ << "null";
    return *this;
}

JsonWriter& JsonWriter::number_array(const std::vector<double>& v) {
    begin_array();
    for (double x : v) value(x);
    return end_array();
}

} // namespace cbdi
