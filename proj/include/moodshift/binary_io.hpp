#pragma once

// Little-endian primitive readers/writers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "moodshift/error.hpp"

namespace moodshift {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& os) : os_(os) {}

    void bytes(const void* data, std::size_t n) { os_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }
    void f64(double v) { bytes(&v, sizeof v); }
    void string(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    std::ostream& os_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    void bytes(void* data, std::size_t n) {
        is_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) throw FormatError(source_ + ": unexpected end of file");
    }
    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint64_t u64() { return read<std::uint64_t>(); }
    float f32() { return read<float>(); }
    double f64() { return read<double>(); }
    std::string string(std::uint32_t max_length = 1u << 24) {
        const std::uint32_t n = u32();
        if (n > max_length) throw FormatError(source_ + ": string length " + std::to_string(n) + " is implausible");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

private:
    template <typename T>
    T read() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }

    std::istream& is_;
    std::string source_;
};

}  // namespace moodshift
