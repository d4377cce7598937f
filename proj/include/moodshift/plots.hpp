#pragma once

// Static SVG figures. Everything is written with fixed formatting so that the
// same inputs always give byte-identical files.

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "moodshift/mel.hpp"
#include "moodshift/metrics.hpp"
#include "moodshift/pitch.hpp"

namespace moodshift {

struct LabeledMel {
    std::string label;
    Matrix mel;
};

struct LabeledContour {
    std::string label;
    PitchContour contour;
};

/// One row of log-mel heatmaps on a shared colour scale, and below it every
/// pitch contour overlaid on a common time axis.
void write_diagnostics_plot(const std::filesystem::path& path, const std::vector<LabeledMel>& mels,
                            const std::vector<LabeledContour>& contours);

/// Side-by-side bar charts (mean +/- sd of squared normalized error per
/// arousal bin) grouped by target and by source arousal. Empty bins are
/// marked instead of drawn.
void write_classwise_plot(const std::filesystem::path& path, const std::array<ClassStats, 7>& by_target,
                          const std::array<ClassStats, 7>& by_source);

struct MomentSeries {
    std::vector<double> t;
    std::vector<double> empirical_mean, analytic_mean;
    std::vector<double> empirical_var, analytic_var;
};

/// Mean and variance against diffusion time, empirical as markers and closed
/// form as lines.
void write_moment_plot(const std::filesystem::path& path, const MomentSeries& series);

}  // namespace moodshift
