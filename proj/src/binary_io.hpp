#pragma once

// Little-endian primitive I/O shared by the binary file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ardiff::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class UInt>
void write_le(std::ostream& os, UInt v) {
    std::array<char, sizeof(UInt)> buf{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        buf[i] = static_cast<char>(static_cast<unsigned char>(v >> (8 * i)));
    }
    os.write(buf.data(), buf.size());
}

template <class UInt>
UInt read_le(std::istream& is, const char* what) {
    std::array<char, sizeof(UInt)> buf{};
    if (!is.read(buf.data(), buf.size())) {
        throw FormatError(std::string("unexpected end of file reading ") + what);
    }
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        v |= static_cast<UInt>(static_cast<unsigned char>(buf[i])) << (8 * i);
    }
    return v;
}

inline void write_f32(std::ostream& os, float v) { write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(read_le<std::uint32_t>(is, what));
}
inline void write_f64(std::ostream& os, double v) { write_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& is, const char* what) {
    return std::bit_cast<double>(read_le<std::uint64_t>(is, what));
}

inline void write_bytes(std::ostream& os, std::string_view bytes) {
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void expect_bytes(std::istream& is, std::string_view expected, const char* what) {
    std::string got(expected.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != expected) {
        throw FormatError(std::string("bad magic: not a ") + what + " file");
    }
}

}  // namespace ardiff::io
