#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "moodshift/encoders.hpp"
#include "moodshift/manifest.hpp"
#include "moodshift/mel_features.hpp"

namespace moodshift {

/// Synthetic stand-in for an in-the-wild emotional speech corpus. Every
/// utterance is a sum of sinusoids at the mel band centres whose log
/// amplitudes combine a per-speaker timbre curve, a zero-mean piecewise
/// constant "content" pattern and a linear spectral tilt. The tilt is solved
/// per utterance so that the arousal proxy of the extracted mel equals the
/// sampled label.
struct ToyDatasetConfig {
    int n_utts = 100;
    std::uint64_t seed = 1234;
    int n_speakers = 8;
    int min_frames = 24;
    int max_frames = 40;
    int segment_frames = 8;
    double content_std = 0.6;
    double speaker_std = 0.4;
    double label_mean = 4.0;
    double label_sd = 0.95;
    double train_fraction = 0.8;
    double valid_fraction = 0.1;
    MelConfig mel{};
    ArousalProxyConfig proxy{};
};

struct ToyUtterance {
    UtteranceRecord record;
    Waveform audio;
    double tilt = 0.0;  // solved log-amplitude slope across bands
};

/// Synthesizes the corpus in memory; deterministic given config.seed.
std::vector<ToyUtterance> synthesize_toy_dataset(const ToyDatasetConfig& config);

/// Writes `<out_dir>/audio/<id>.wav` and `<out_dir>/manifest.jsonl`; returns
/// the records (audio paths relative to out_dir).
std::vector<UtteranceRecord> make_toy_dataset(const ToyDatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace moodshift
