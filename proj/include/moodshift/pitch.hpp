#pragma once

#include <vector>

#include "moodshift/wav.hpp"

namespace moodshift {

struct PitchConfig {
    double window_seconds = 0.025;
    double hop_seconds = 0.010;
    double voicing_threshold = 0.3;  // minimum normalized autocorrelation peak
    double f0_min = 60.0;
    double f0_max = 500.0;
};

struct PitchContour {
    std::vector<double> f0;  // Hz per frame, 0 for unvoiced frames
    double frame_rate = 0.0;

    double voiced_fraction() const;
    double mean_voiced() const;    // 0 when nothing is voiced
    double median_voiced() const;  // 0 when nothing is voiced
    double sd_voiced() const;
};

/// Normalized autocorrelation pitch tracker. Each frame correlates the window
/// with the signal shifted by every candidate lag, takes the first peak within
/// 90% of the best one and refines it by parabolic interpolation. Silent
/// frames and frames whose peak is below the threshold are unvoiced.
PitchContour pitch_contour(const Waveform& audio, const PitchConfig& config = {});

}  // namespace moodshift
