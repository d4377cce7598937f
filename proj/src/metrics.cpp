#include "moodshift/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "moodshift/error.hpp"
#include "moodshift/manifest.hpp"

namespace moodshift {

double normalize_arousal(double a) { return ArousalLabel(a).normalized(); }

double denormalize_arousal(double a_norm) { return ArousalLabel::kMin + a_norm * (ArousalLabel::kMax - ArousalLabel::kMin); }

namespace {

double squared_error(const ConversionEvalRow& r) {
    const double d = normalize_arousal(r.predicted_arousal) - normalize_arousal(r.target_arousal);
    return d * d;
}

std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

SerErrors ser_errors(std::span<const ConversionEvalRow> rows) {
    if (rows.empty()) throw ContractError("ser_errors needs at least one row");
    SerErrors e;
    for (const auto& r : rows) {
        const double d = normalize_arousal(r.predicted_arousal) - normalize_arousal(r.target_arousal);
        e.mse += d * d;
        e.abs_percent += std::abs(d);
    }
    e.count = rows.size();
    e.mse /= static_cast<double>(rows.size());
    e.abs_percent = 100.0 * e.abs_percent / static_cast<double>(rows.size());
    return e;
}

std::array<ClassStats, 7> classwise_errors(std::span<const ConversionEvalRow> rows, GroupBy group_by) {
    if (rows.empty()) throw ContractError("classwise_errors needs at least one row");
    std::array<ClassStats, 7> out;
    std::array<std::vector<double>, 7> errors;
    for (int b = 0; b < 7; ++b) out[b].bin = b + 1;
    for (const auto& r : rows) {
        const double key = group_by == GroupBy::Target ? r.target_arousal : r.source_arousal;
        errors[ArousalLabel(key).bin() - 1].push_back(squared_error(r));
    }
    for (int b = 0; b < 7; ++b) {
        ClassStats& c = out[b];
        c.count = errors[b].size();
        c.empty = c.count == 0;
        if (c.empty) continue;
        const double n = static_cast<double>(c.count);
        c.mean = std::accumulate(errors[b].begin(), errors[b].end(), 0.0) / n;
        double ss = 0.0;
        for (double e : errors[b]) ss += (e - c.mean) * (e - c.mean);
        c.sd = std::sqrt(ss / n);
    }
    return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ContractError("spearman needs two equal-length series of >= 2 values");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

double mean_per_source_spearman(std::span<const ConversionEvalRow> rows) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_source;
    for (const auto& r : rows) {
        auto& [t, p] = by_source[r.utterance_id];
        t.push_back(r.target_arousal);
        p.push_back(r.predicted_arousal);
    }
    double total = 0.0;
    int n = 0;
    for (const auto& [id, tp] : by_source) {
        if (tp.first.size() < 2) continue;
        total += spearman(tp.first, tp.second);
        ++n;
    }
    if (n == 0) throw ContractError("no source has two or more conversions");
    return total / n;
}

double pooled_spearman(std::span<const ConversionEvalRow> rows) {
    std::vector<double> t, p;
    for (const auto& r : rows) {
        t.push_back(r.target_arousal);
        p.push_back(r.predicted_arousal);
    }
    return spearman(t, p);
}

}  // namespace moodshift
