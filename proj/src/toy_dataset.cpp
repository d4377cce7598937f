#include "moodshift/toy_dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "moodshift/error.hpp"
#include "moodshift/random.hpp"

namespace moodshift {

namespace {

// Three-tap smoothing across mel bands, edges replicated.
Vector smooth_bands(const Vector& v) {
    const Eigen::Index n = v.size();
    Vector out(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        const double left = v[std::max<Eigen::Index>(0, m - 1)];
        const double right = v[std::min<Eigen::Index>(n - 1, m + 1)];
        out[m] = 0.25 * left + 0.5 * v[m] + 0.25 * right;
    }
    return out;
}

struct Synthesizer {
    // Per-band carrier with its log-amplitude envelope applied; the tilt only
    // rescales whole bands, so a candidate waveform is a weighted band sum.
    Matrix band_signals;  // n_mels x samples
    Vector band_position;  // m / (n - 1) - 0.5

    std::vector<double> render(double tilt) const {
        const Vector gains = (tilt * band_position).array().exp().matrix();
        const Vector x = band_signals.transpose() * gains;
        const double peak = x.cwiseAbs().maxCoeff();
        const double scale = peak > 0.9 ? 0.9 / peak : 1.0;
        std::vector<double> out(static_cast<std::size_t>(x.size()));
        for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = quantize_pcm16(scale * x[i]);
        return out;
    }
};

Synthesizer build_synthesizer(const Matrix& log_amp, const ToyDatasetConfig& cfg, Rng& rng) {
    const MelConfig& mc = cfg.mel;
    const auto n = static_cast<Eigen::Index>(mc.n_mels);
    const Eigen::Index frames = log_amp.cols();
    const Eigen::Index samples = mc.n_fft + (frames - 1) * mc.hop;
    const auto centres = mel_band_centres(mc);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);

    Synthesizer s;
    s.band_signals.resize(n, samples);
    s.band_position.resize(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        s.band_position[m] = n > 1 ? static_cast<double>(m) / static_cast<double>(n - 1) - 0.5 : 0.0;
        const double phase = phase_dist(rng);
        const double omega = 2.0 * std::numbers::pi * centres[m] / mc.sample_rate;
        for (Eigen::Index i = 0; i < samples; ++i) {
            // Linear interpolation of the envelope between frame centres.
            const double pos = (static_cast<double>(i) - 0.5 * mc.n_fft) / mc.hop;
            const double clamped = std::clamp(pos, 0.0, static_cast<double>(frames - 1));
            const auto f0 = static_cast<Eigen::Index>(std::floor(clamped));
            const Eigen::Index f1 = std::min(f0 + 1, frames - 1);
            const double w = clamped - static_cast<double>(f0);
            const double la = (1.0 - w) * log_amp(m, f0) + w * log_amp(m, f1);
            s.band_signals(m, i) = std::exp(la) * std::sin(omega * static_cast<double>(i) + phase);
        }
    }
    return s;
}

double proxy_of(const std::vector<double>& wave, const ToyDatasetConfig& cfg) {
    return arousal_proxy(mel_extract(wave, cfg.mel).values(), cfg.proxy);
}

}  // namespace

std::vector<ToyUtterance> synthesize_toy_dataset(const ToyDatasetConfig& cfg) {
    if (cfg.n_utts < 1) throw ContractError("toy dataset needs n_utts >= 1");
    if (cfg.n_speakers < 1 || cfg.min_frames < 1 || cfg.max_frames < cfg.min_frames || cfg.segment_frames < 1) {
        throw ConfigError("invalid toy dataset shape parameters");
    }
    cfg.mel.validate();
    const auto n = static_cast<Eigen::Index>(cfg.mel.n_mels);
    const double level = std::log(0.5 / static_cast<double>(n));

    std::vector<Vector> speakers;
    for (int s = 0; s < cfg.n_speakers; ++s) {
        Rng rng(mix_seed(cfg.seed, 1'000'000 + static_cast<std::uint64_t>(s)));
        speakers.push_back(smooth_bands(cfg.speaker_std * standard_normal(n, 1, rng)));
    }

    std::vector<ToyUtterance> out;
    out.reserve(static_cast<std::size_t>(cfg.n_utts));
    const int n_train = static_cast<int>(std::lround(cfg.train_fraction * cfg.n_utts));
    const int n_valid = static_cast<int>(std::lround(cfg.valid_fraction * cfg.n_utts));
    for (int u = 0; u < cfg.n_utts; ++u) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(u)));
        std::normal_distribution<double> label_dist(cfg.label_mean, cfg.label_sd);
        const double label = std::clamp(label_dist(rng), ArousalLabel::kMin, ArousalLabel::kMax);
        const int speaker = std::uniform_int_distribution<int>(0, cfg.n_speakers - 1)(rng);
        const int frames = std::uniform_int_distribution<int>(cfg.min_frames, cfg.max_frames)(rng);

        Matrix content(n, frames);
        for (int start = 0; start < frames; start += cfg.segment_frames) {
            const int len = std::min(cfg.segment_frames, frames - start);
            const Vector pattern = smooth_bands(cfg.content_std * standard_normal(n, 1, rng));
            content.middleCols(start, len) = pattern.replicate(1, len);
        }
        content = content.colwise() - content.rowwise().mean();
        const Matrix log_amp = (content.colwise() + speakers[static_cast<std::size_t>(speaker)]).array() + level;

        const Synthesizer synth = build_synthesizer(log_amp, cfg, rng);
        double lo = -12.0, hi = 12.0;
        double p_lo = proxy_of(synth.render(lo), cfg);
        double p_hi = proxy_of(synth.render(hi), cfg);
        if (!(p_lo < label && label < p_hi)) {
            throw ConfigError("toy synthesis cannot reach arousal " + std::to_string(label) +
                              " with the configured proxy range");
        }
        double tilt = 0.0;
        for (int it = 0; it < 80; ++it) {
            tilt = 0.5 * (lo + hi);
            const double p = proxy_of(synth.render(tilt), cfg);
            if (std::abs(p - label) < 1e-6) break;
            (p < label ? lo : hi) = tilt;
        }

        char id[32];
        std::snprintf(id, sizeof id, "toy_%04d", u);
        char spk[32];
        std::snprintf(spk, sizeof spk, "spk_%02d", speaker);
        ToyUtterance t;
        t.record.utterance_id = id;
        t.record.audio_path = std::string("audio/") + id + ".wav";
        t.record.speaker_id = spk;
        t.record.arousal = ArousalLabel(label);
        t.record.split = u < n_train ? Split::Train : (u < n_train + n_valid ? Split::Valid : Split::Test);
        t.audio = Waveform{synth.render(tilt), cfg.mel.sample_rate};
        t.tilt = tilt;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<UtteranceRecord> make_toy_dataset(const ToyDatasetConfig& config, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "audio", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "audio").string() + ": " + ec.message());
    const auto utts = synthesize_toy_dataset(config);
    std::vector<UtteranceRecord> records;
    for (const auto& u : utts) {
        write_wav(out_dir / u.record.audio_path, u.audio);
        records.push_back(u.record);
    }
    save_manifest(out_dir / "manifest.jsonl", records);
    return records;
}

}  // namespace moodshift
