#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "moodshift/mel.hpp"
#include "moodshift/wav.hpp"

namespace moodshift {

/// Log-mel analysis parameters. Frames are taken without centering padding,
/// so a signal of `len >= n_fft` samples yields 1 + (len - n_fft) / hop frames
/// (integer division); shorter signals are zero-padded to a single frame.
struct MelConfig {
    int sample_rate = 22050;
    int n_fft = 1024;
    int hop = 256;
    int n_mels = 80;
    double fmin = 0.0;
    double fmax = 0.0;  // 0 means sample_rate / 2
    double log_floor = 1e-5;

    double effective_fmax() const { return fmax > 0.0 ? fmax : 0.5 * sample_rate; }
    double frame_rate() const { return static_cast<double>(sample_rate) / hop; }
    void validate() const;  // throws ConfigError
    bool operator==(const MelConfig&) const = default;
};

int frame_count(std::size_t n_samples, const MelConfig& config);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-scale filters with unit peak, n_mels x (n_fft / 2 + 1).
Matrix mel_filterbank(const MelConfig& config);

/// Centre frequency in Hz of every mel band.
std::vector<double> mel_band_centres(const MelConfig& config);

/// Periodic Hann window.
std::vector<double> hann_window(int length);

/// Magnitude STFT, (n_fft / 2 + 1) x frames.
Matrix stft_magnitude(std::span<const double> samples, const MelConfig& config);

/// log(max(filterbank * |STFT|, log_floor)). Throws ContractError on an
/// empty or non-finite waveform.
MelSpectrogram mel_extract(std::span<const double> samples, const MelConfig& config);

/// Filterbank pseudo-inverse followed by Griffin-Lim phase recovery. The
/// result has n_fft + (T - 1) * hop samples.
Waveform mel_invert(const MelSpectrogram& mel, const MelConfig& config, int n_gl_iters = 60,
                    std::uint64_t seed = 0);

}  // namespace moodshift
