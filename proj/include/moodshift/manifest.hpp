#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace moodshift {

/// Arousal on the 1..7 annotation scale.
class ArousalLabel {
public:
    static constexpr double kMin = 1.0;
    static constexpr double kMax = 7.0;

    /// Throws DomainError outside [1, 7].
    explicit ArousalLabel(double value);

    double value() const { return value_; }
    /// (a - 1) / 6, in [0, 1].
    double normalized() const { return (value_ - kMin) / (kMax - kMin); }
    /// Nearest integer bin in 1..7.
    int bin() const;

    static ArousalLabel clamped(double value);

private:
    double value_;
};

enum class Split { Train, Valid, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);  // throws ManifestError

struct UtteranceRecord {
    std::string utterance_id;
    std::string audio_path;  // relative paths are resolved against the manifest directory
    std::string speaker_id;
    ArousalLabel arousal{4.0};
    Split split = Split::Train;
};

/// One JSON object per line with keys utterance_id, audio_path, speaker_id,
/// arousal, split. Blank lines are ignored. Throws ManifestError naming the
/// line for malformed rows, out-of-range arousal or duplicate ids. An empty
/// manifest yields an empty list and a warning.
std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path,
                                           std::vector<std::string>* warnings = nullptr);

void save_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);

std::vector<UtteranceRecord> filter_split(const std::vector<UtteranceRecord>& records, Split split);

/// Absolute location of a record's audio given the manifest it came from.
std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path,
                                         const UtteranceRecord& record);

}  // namespace moodshift
