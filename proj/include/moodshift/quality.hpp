#pragma once

// Perceptual quality scores come from an external estimator. This module only
// defines the interface, an adapter for scores recorded offline, and the
// aggregation used in reports, which never fails because of a missing scorer.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moodshift/wav.hpp"

namespace moodshift {

struct QualityScores {
    double sig = 0.0;   // speech quality, 1..5
    double ovrl = 0.0;  // overall quality, 1..5
};

class QualityScorer {
public:
    virtual ~QualityScorer() = default;
    /// nullopt when the scorer has nothing for this item. May throw; callers
    /// treat exceptions as unavailability.
    virtual std::optional<QualityScores> score(std::string_view item_id, const Waveform& audio) const = 0;
};

/// Serves scores from a JSON object {"<item id>": {"SIG": x, "OVRL": y}, ...}.
class RecordedScoresAdapter final : public QualityScorer {
public:
    explicit RecordedScoresAdapter(const std::filesystem::path& path);  // throws FormatError / IoError
    std::optional<QualityScores> score(std::string_view item_id, const Waveform& audio) const override;

private:
    std::map<std::string, QualityScores, std::less<>> scores_;
};

struct QualityItem {
    std::string id;
    const Waveform* audio = nullptr;
};

struct QualityReport {
    bool available = false;
    std::string status;  // "ok", "n/a" (no scorer) or the reason it is unavailable
    double sig = 0.0;    // means over scored items
    double ovrl = 0.0;
    std::size_t scored = 0;
    std::size_t requested = 0;

    std::string sig_text() const;
    std::string ovrl_text() const;
};

/// Averages the scorer over the items. A null scorer yields status "n/a";
/// failures or out-of-range values mark the report unavailable.
QualityReport quality_metric(const QualityScorer* scorer, const std::vector<QualityItem>& items);

}  // namespace moodshift
