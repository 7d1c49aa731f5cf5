#pragma once

#include <sstream>
#include <string>
#include <vector>

namespace cbdi {

/// Insertion-ordered JSON emitter with fixed float formatting (17 significant
/// digits) so outputs are byte-stable across runs of the same build.
class JsonWriter {
public:
    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();

    JsonWriter& key(const std::string& k);

    JsonWriter& value(double v);
    JsonWriter& value(long v);
    JsonWriter& value(unsigned long long v);
    JsonWriter& value(int v) { return value(static_cast<long>(v)); }
    JsonWriter& value(bool v);
    JsonWriter& value(const std::string& v);
    JsonWriter& value(const char* v) { return value(std::string(v)); }
    JsonWriter& null();

    template <typename T>
    JsonWriter& kv(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }

    JsonWriter& number_array(const std::vector<double>& v);

    std::string str() const { return out_.str(); }

    static std::string format_double(double v);

private:
    void pre_value();
    void value_escaped(const std::string& s);
    std::ostringstream out_;
    std::vector<bool> needs_comma_; // per nesting level
    bool pending_key_ = false;
};

} // namespace cbdi
