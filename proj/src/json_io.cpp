#include "rlab/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rlab {

std::string format_double(double x, int significant_digits) {
    if (!std::isfinite(x)) throw std::invalid_argument("format_double: non-finite value");
    if (x == 0.0) return "0";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", significant_digits, x);
    return buf;
}

void JsonWriter::comma_if_needed() {
    if (after_key_) {
        after_key_ = false;
        return;
    }
    if (!needs_comma_.empty()) {
        if (needs_comma_.back()) out_ += ',';
        needs_comma_.back() = true;
    }
}

void JsonWriter::raw(const std::string& s) {
    comma_if_needed();
    out_ += s;
}

void JsonWriter::begin_object() {
    comma_if_needed();
    out_ += '{';
    needs_comma_.push_back(false);
}

void JsonWriter::end_object() {
    out_ += '}';
    needs_comma_.pop_back();
}

void JsonWriter::begin_array() {
    comma_if_needed();
    out_ += '[';
    needs_comma_.push_back(false);
}

void JsonWriter::end_array() {
    out_ += ']';
    needs_comma_.pop_back();
}

void JsonWriter::key(const std::string& k) {
    if (!needs_comma_.empty()) {
        if (needs_comma_.back()) out_ += ',';
        needs_comma_.back() = true;
    }
    out_ += '"';
    out_ += json_escape(k);
    out_ += "\":";
    after_key_ = true;
}

void JsonWriter::value(const std::string& s) { raw('"' + json_escape(s) + '"'); }
void JsonWriter::value(const char* s) { value(std::string(s)); }
void JsonWriter::value(double x) { raw(format_double(x, digits_)); }
void JsonWriter::value(int x) { raw(std::to_string(x)); }
void JsonWriter::value(std::int64_t x) { raw(std::to_string(x)); }
void JsonWriter::value(std::uint64_t x) { raw(std::to_string(x)); }
void JsonWriter::value(bool b) { raw(b ? "true" : "false"); }
void JsonWriter::value_null() { raw("null"); }

void JsonWriter::value(std::span<const double> xs) {
    begin_array();
    for (double x : xs) value(x);
    end_array();
}

void JsonWriter::value(const std::vector<std::size_t>& xs) {
    begin_array();
    for (std::size_t x : xs) value(x);
    end_array();
}

void JsonWriter::value_raw(const std::string& json_text) { raw(json_text); }

std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

std::string fnv1a_hex(std::span<const char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
}

} // namespace rlab
