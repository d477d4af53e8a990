#include "cmls/io/container.hpp"

#include <bit>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cmls::io {

namespace {

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

std::string unescape(std::string_view s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            out += s[i] == 'n' ? '\n' : s[i];
        }
        else {
            out += s[i];
        }
    }
    return out;
}

void put_le(std::ostream& os, std::uint64_t v, int bytes)
{
    for (int i = 0; i < bytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::istream& is, int bytes, const std::string& source)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) throw FormatError(source + ": truncated header");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

} // namespace

std::string encode_metadata(const Metadata& meta)
{
    std::string out;
    for (const auto& [k, v] : meta) {
        if (k.empty() || k.find('=') != std::string::npos || k.find('\n') != std::string::npos)
            throw std::invalid_argument("invalid metadata key '" + k + "'");
        out += k;
        out += '=';
        out += escape(v);
        out += '\n';
    }
    return out;
}

Metadata decode_metadata(std::string_view text)
{
    Metadata meta;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw FormatError("metadata line without '=': " + std::string(line));
        meta[std::string(line.substr(0, eq))] = unescape(line.substr(eq + 1));
    }
    return meta;
}

void write_header(std::ostream& os, std::string_view magic, std::uint16_t version, const Metadata& meta)
{
    const std::string text = encode_metadata(meta);
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    put_le(os, version, 2);
    put_le(os, text.size(), 4);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Metadata read_header(std::istream& is, std::string_view magic, std::uint16_t version, const std::string& source)
{
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!is || got != magic)
        throw FormatError(source + ": bad magic bytes (expected '" + std::string(magic) + "')");
    const auto v = get_le(is, 2, source);
    if (v != version)
        throw FormatError(source + ": unsupported format version " + std::to_string(v) + " (expected " +
                          std::to_string(version) + ")");
    const auto len = get_le(is, 4, source);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(is.gcount()) != len) throw FormatError(source + ": truncated metadata block");
    return decode_metadata(text);
}

void write_f32(std::ostream& os, std::span<const float> values)
{
    std::vector<char> buf(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void write_f32(std::ostream& os, std::span<const double> values)
{
    std::vector<float> f(values.begin(), values.end());
    write_f32(os, std::span<const float>(f));
}

void read_f32(std::istream& is, std::span<float> out, const std::string& source)
{
    std::vector<char> buf(out.size() * 4);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
        throw FormatError(source + ": truncated payload (wanted " + std::to_string(buf.size()) + " bytes, got " +
                          std::to_string(is.gcount()) + ")");
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[i * 4 + b])) << (8 * b);
        out[i] = std::bit_cast<float>(bits);
    }
}

void read_f32(std::istream& is, std::span<double> out, const std::string& source)
{
    std::vector<float> f(out.size());
    read_f32(is, std::span<float>(f), source);
    std::copy(f.begin(), f.end(), out.begin());
}

const std::string& get(const Metadata& meta, const std::string& key)
{
    const auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("metadata key '" + key + "' missing");
    return it->second;
}

std::size_t get_size(const Metadata& meta, const std::string& key)
{
    const std::string& s = get(meta, key);
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw FormatError("metadata key '" + key + "' is not an unsigned integer: '" + s + "'");
    return v;
}

double get_double(const Metadata& meta, const std::string& key)
{
    const std::string& s = get(meta, key);
    std::istringstream is(s);
    double v = 0.0;
    is >> v;
    if (is.fail()) throw FormatError("metadata key '" + key + "' is not a number: '" + s + "'");
    return v;
}

std::vector<std::size_t> get_sizes(const Metadata& meta, const std::string& key)
{
    const std::string& s = get(meta, key);
    std::vector<std::size_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoul(tok));
    }
    return out;
}

std::string join_sizes(std::span<const std::size_t> values)
{
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
    return out;
}

std::string format_double(double v)
{
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << v;
    return os.str();
}

} // namespace cmls::io
