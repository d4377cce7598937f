#include "moodshift/quality.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "moodshift/error.hpp"

namespace moodshift {

using nlohmann::json;

namespace {

bool in_range(double v) { return v >= 1.0 && v <= 5.0; }

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

RecordedScoresAdapter::RecordedScoresAdapter(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read quality scores " + path.string());
    try {
        const json doc = json::parse(is);
        for (const auto& [id, v] : doc.items()) {
            scores_[id] = {v.at("SIG").get<double>(), v.at("OVRL").get<double>()};
        }
    } catch (const json::exception& e) {
        throw FormatError("malformed quality score file " + path.string() + ": " + e.what());
    }
}

std::optional<QualityScores> RecordedScoresAdapter::score(std::string_view item_id, const Waveform&) const {
    auto it = scores_.find(item_id);
    if (it == scores_.end()) return std::nullopt;
    return it->second;
}

std::string QualityReport::sig_text() const { return available ? fixed2(sig) : "n/a"; }
std::string QualityReport::ovrl_text() const { return available ? fixed2(ovrl) : "n/a"; }

QualityReport quality_metric(const QualityScorer* scorer, const std::vector<QualityItem>& items) {
    QualityReport report;
    report.requested = items.size();
    if (!scorer) {
        report.status = "n/a";
        return report;
    }
    static const Waveform kEmpty{};
    try {
        for (const auto& item : items) {
            const auto s = scorer->score(item.id, item.audio ? *item.audio : kEmpty);
            if (!s) continue;
            if (!in_range(s->sig) || !in_range(s->ovrl)) {
                report.status = "unavailable: score for '" + item.id + "' outside [1, 5]";
                return report;
            }
            report.sig += s->sig;
            report.ovrl += s->ovrl;
            ++report.scored;
        }
    } catch (const std::exception& e) {
        report = QualityReport{};
        report.requested = items.size();
        report.status = std::string("unavailable: ") + e.what();
        return report;
    }
    if (report.scored == 0) {
        report.sig = report.ovrl = 0.0;
        report.status = "unavailable: scorer returned no scores";
        return report;
    }
    report.sig /= static_cast<double>(report.scored);
    report.ovrl /= static_cast<double>(report.scored);
    report.available = true;
    report.status = "ok";
    return report;
}

}  // namespace moodshift
