#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rlab {

/// Formats a double with 12 significant digits ("%.12g"), the canonical
/// report precision. NaN/inf are rejected; negative zero collapses to "0".
std::string format_double(double x, int significant_digits = 12);

/// Streaming writer for canonical JSON output: caller emits keys in sorted
/// order, floats are fixed-format, no whitespace variance. Reports produced
/// through this writer are byte-identical across runs and worker counts.
class JsonWriter {
public:
    explicit JsonWriter(int float_digits = 12) : digits_(float_digits) {}

    void begin_object();
    void end_object();
    void begin_array();
    void end_array();
    void key(const std::string& k);
    void value(const std::string& s);
    void value(const char* s);
    void value(double x);
    void value(int x);
    void value(std::int64_t x);
    void value(std::uint64_t x);
    void value(bool b);
    void value_null();
    void value(std::span<const double> xs);
    void value(const std::vector<std::size_t>& xs);
    /// Splices pre-serialized JSON text as the next value.
    void value_raw(const std::string& json_text);

    const std::string& str() const { return out_; }
    std::string take() { return std::move(out_); }

private:
    void comma_if_needed();
    void raw(const std::string& s);

    std::string out_;
    std::vector<bool> needs_comma_;
    bool after_key_ = false;
    int digits_;
};

std::string json_escape(const std::string& s);

/// FNV-1a 64-bit content hash, hex-encoded; used for output manifests.
std::string fnv1a_hex(std::span<const char> bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

} // namespace rlab
