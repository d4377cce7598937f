#include "moodshift/manifest.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>
#include <unordered_set>

#include "moodshift/error.hpp"

namespace moodshift {

using nlohmann::json;

ArousalLabel::ArousalLabel(double value) : value_(value) {
    if (!(value >= kMin && value <= kMax)) {
        std::ostringstream os;
        os << "arousal " << value << " outside [1, 7]";
        throw DomainError(os.str());
    }
}

int ArousalLabel::bin() const { return static_cast<int>(std::lround(value_)); }

ArousalLabel ArousalLabel::clamped(double value) {
    if (std::isnan(value)) throw DomainError("arousal is NaN");
    return ArousalLabel(std::min(kMax, std::max(kMin, value)));
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "valid") return Split::Valid;
    if (text == "test") return Split::Test;
    throw ManifestError("unknown split '" + std::string(text) + "'");
}

std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest " + path.string());
    std::vector<UtteranceRecord> records;
    std::unordered_set<std::string> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + " line " + std::to_string(line_no) + ": ";
        json row;
        try {
            row = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ManifestError(where + "malformed record (" + e.what() + ")");
        }
        UtteranceRecord rec;
        try {
            rec.utterance_id = row.at("utterance_id").get<std::string>();
            rec.audio_path = row.at("audio_path").get<std::string>();
            rec.speaker_id = row.at("speaker_id").get<std::string>();
            const double arousal = row.at("arousal").get<double>();
            try {
                rec.arousal = ArousalLabel(arousal);
            } catch (const DomainError& e) {
                throw ManifestError(where + "record '" + rec.utterance_id + "': " + e.what());
            }
            rec.split = parse_split(row.at("split").get<std::string>());
        } catch (const json::exception& e) {
            throw ManifestError(where + "malformed record (" + e.what() + ")");
        } catch (const ManifestError& e) {
            if (std::string_view(e.what()).starts_with(where)) throw;
            throw ManifestError(where + e.what());
        }
        if (rec.utterance_id.empty()) throw ManifestError(where + "empty utterance_id");
        if (!seen.insert(rec.utterance_id).second) {
            throw ManifestError(where + "duplicate utterance_id '" + rec.utterance_id + "'");
        }
        records.push_back(std::move(rec));
    }
    if (records.empty() && warnings) warnings->push_back("manifest " + path.string() + " is empty");
    return records;
}

void save_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write manifest " + path.string());
    for (const auto& r : records) {
        json row = {{"utterance_id", r.utterance_id},
                    {"audio_path", r.audio_path},
                    {"speaker_id", r.speaker_id},
                    {"arousal", r.arousal.value()},
                    {"split", std::string(to_string(r.split))}};
        os << row.dump() << '\n';
    }
}

std::vector<UtteranceRecord> filter_split(const std::vector<UtteranceRecord>& records, Split split) {
    std::vector<UtteranceRecord> out;
    for (const auto& r : records) {
        if (r.split == split) out.push_back(r);
    }
    return out;
}

std::filesystem::path resolve_audio_path(const std::filesystem::path& manifest_path, const UtteranceRecord& record) {
    const std::filesystem::path p(record.audio_path);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

}  // namespace moodshift
