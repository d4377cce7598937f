#include "moodshift/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "moodshift/error.hpp"

namespace moodshift {

namespace {

std::vector<double> voiced(const std::vector<double>& f0) {
    std::vector<double> v;
    for (double f : f0) {
        if (f > 0.0) v.push_back(f);
    }
    return v;
}

}  // namespace

double PitchContour::voiced_fraction() const {
    if (f0.empty()) return 0.0;
    return static_cast<double>(voiced(f0).size()) / static_cast<double>(f0.size());
}

double PitchContour::mean_voiced() const {
    const auto v = voiced(f0);
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double f : v) s += f;
    return s / static_cast<double>(v.size());
}

double PitchContour::median_voiced() const {
    auto v = voiced(f0);
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double PitchContour::sd_voiced() const {
    const auto v = voiced(f0);
    if (v.size() < 2) return 0.0;
    const double m = mean_voiced();
    double s = 0.0;
    for (double f : v) s += (f - m) * (f - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

PitchContour pitch_contour(const Waveform& audio, const PitchConfig& config) {
    if (audio.sample_rate <= 0) throw ContractError("pitch tracking needs a known sample rate");
    if (!(config.f0_min > 0.0 && config.f0_max > config.f0_min)) throw ContractError("bad pitch search range");
    const double sr = audio.sample_rate;
    const auto win = static_cast<std::size_t>(std::lround(config.window_seconds * sr));
    const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.hop_seconds * sr)));
    const auto lag_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / config.f0_max)));
    const auto lag_max = static_cast<std::size_t>(std::ceil(sr / config.f0_min));
    const auto& x = audio.samples;

    PitchContour out;
    out.frame_rate = sr / static_cast<double>(hop);
    if (win == 0 || x.size() < win) return out;

    std::vector<double> r;
    for (std::size_t start = 0; start + win <= x.size(); start += hop) {
        double mean = 0.0;
        for (std::size_t n = 0; n < win; ++n) mean += x[start + n];
        mean /= static_cast<double>(win);
        auto at = [&](std::size_t i) { return x[i] - mean; };

        double e0 = 0.0;
        for (std::size_t n = 0; n < win; ++n) e0 += at(start + n) * at(start + n);
        const std::size_t top = std::min(lag_max + 1, x.size() - start - win + 1);
        if (e0 < 1e-10 * static_cast<double>(win) || top <= lag_min + 1) {
            out.f0.push_back(0.0);
            continue;
        }
        r.assign(top, 0.0);
        for (std::size_t lag = lag_min - 1; lag < top; ++lag) {
            double c = 0.0, e1 = 0.0;
            for (std::size_t n = 0; n < win; ++n) {
                const double b = at(start + n + lag);
                c += at(start + n) * b;
                e1 += b * b;
            }
            r[lag] = e1 > 0.0 ? c / std::sqrt(e0 * e1) : 0.0;
        }
        double best = 0.0;
        for (std::size_t lag = lag_min; lag + 1 < top; ++lag) best = std::max(best, r[lag]);
        if (best < config.voicing_threshold) {
            out.f0.push_back(0.0);
            continue;
        }
        std::size_t pick = 0;
        for (std::size_t lag = lag_min; lag + 1 < top; ++lag) {
            if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
                pick = lag;
                break;
            }
        }
        if (pick == 0) {
            out.f0.push_back(0.0);
            continue;
        }
        const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
        const double denom = a - 2.0 * b + c;
        const double shift = denom != 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
        out.f0.push_back(sr / (static_cast<double>(pick) + shift));
    }
    return out;
}

}  // namespace moodshift
