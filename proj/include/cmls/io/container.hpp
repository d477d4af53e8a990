#pragma once

// Shared binary container layout used by checkpoints and datasets:
//
//   magic        4 bytes
//   version      u16 little-endian
//   header_len   u32 little-endian
//   header       header_len bytes of UTF-8 "key=value" lines
//   payload      little-endian float32 values, layout described by the header

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cmls::io {

using Metadata = std::map<std::string, std::string>;

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string encode_metadata(const Metadata& meta);
Metadata decode_metadata(std::string_view text);

void write_header(std::ostream& os, std::string_view magic, std::uint16_t version, const Metadata& meta);
// Validates magic and version; `source` names the stream in error messages.
Metadata read_header(std::istream& is, std::string_view magic, std::uint16_t version, const std::string& source);

void write_f32(std::ostream& os, std::span<const float> values);
void write_f32(std::ostream& os, std::span<const double> values);
void read_f32(std::istream& is, std::span<float> out, const std::string& source);
void read_f32(std::istream& is, std::span<double> out, const std::string& source);

// Typed metadata access; throws FormatError naming the key when absent or malformed.
const std::string& get(const Metadata& meta, const std::string& key);
std::size_t get_size(const Metadata& meta, const std::string& key);
double get_double(const Metadata& meta, const std::string& key);
std::vector<std::size_t> get_sizes(const Metadata& meta, const std::string& key);

std::string join_sizes(std::span<const std::size_t> values);
std::string format_double(double v);  // round-trips exactly

} // namespace cmls::io
