#include "moodshift/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "moodshift/error.hpp"

namespace moodshift {

namespace {

std::int16_t to_pcm16(double s) {
    const double c = std::clamp(s, -1.0, 1.0);
    return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

void put_u32(std::ofstream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b.data(), 4);
}

void put_u16(std::ofstream& os, std::uint16_t v) {
    const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b.data(), 2);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

double quantize_pcm16(double sample) { return to_pcm16(sample) / 32767.0; }

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
    if (wave.sample_rate <= 0) throw ContractError("wav sample rate must be positive");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
    os.write("RIFF", 4);
    put_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 1);  // PCM
    put_u16(os, 1);  // mono
    put_u32(os, static_cast<std::uint32_t>(wave.sample_rate));
    put_u32(os, static_cast<std::uint32_t>(wave.sample_rate) * 2);
    put_u16(os, 2);
    put_u16(os, 16);
    os.write("data", 4);
    put_u32(os, data_bytes);
    for (double s : wave.samples) {
        const auto v = static_cast<std::uint16_t>(to_pcm16(s));
        put_u16(os, v);
    }
    if (!os) throw IoError("failed writing " + path.string());
}

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw FormatError(path.string() + ": not a RIFF/WAVE file");
    }
    Waveform wave;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = get_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) throw FormatError(path.string() + ": truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw FormatError(path.string() + ": short fmt chunk");
            const std::uint16_t format = get_u16(bytes.data() + body);
            const std::uint16_t channels = get_u16(bytes.data() + body + 2);
            const std::uint16_t bits = get_u16(bytes.data() + body + 14);
            if (format != 1 || bits != 16) throw FormatError(path.string() + ": only 16-bit PCM is supported");
            if (channels != 1) throw FormatError(path.string() + ": only mono audio is supported");
            wave.sample_rate = static_cast<int>(get_u32(bytes.data() + body + 4));
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
            wave.samples.resize(size / 2);
            for (std::size_t i = 0; i < wave.samples.size(); ++i) {
                const auto v = static_cast<std::int16_t>(get_u16(bytes.data() + body + 2 * i));
                wave.samples[i] = v / 32767.0;
            }
            return wave;
        }
        pos = body + size + (size & 1u);
    }
    throw FormatError(path.string() + ": missing data chunk");
}

}  // namespace moodshift
