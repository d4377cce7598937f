#pragma once

#include <filesystem>
#include <vector>

namespace moodshift {

struct Waveform {
    std::vector<double> samples;  // mono, nominally in [-1, 1]
    int sample_rate = 0;
};

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1] before quantization.
void write_wav(const std::filesystem::path& path, const Waveform& wave);

/// Reads mono 16-bit PCM; anything else is a FormatError.
Waveform read_wav(const std::filesystem::path& path);

/// The value write_wav followed by read_wav would produce.
double quantize_pcm16(double sample);

}  // namespace moodshift
