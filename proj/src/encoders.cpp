#include "moodshift/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "moodshift/embedding_cache.hpp"
#include "moodshift/error.hpp"
#include "moodshift/random.hpp"

namespace moodshift {

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

SpeakerEmbedding::SpeakerEmbedding(Vector v) : v_(std::move(v)) {
    if (v_.size() == 0 || !v_.allFinite() || std::abs(v_.norm() - 1.0) > 1e-6) {
        throw ContractError("speaker embedding must be a finite unit vector");
    }
}

EmotionEmbedding::EmotionEmbedding(Vector v) : v_(std::move(v)) {
    if (v_.size() == 0 || !v_.allFinite()) throw ContractError("emotion embedding must be a non-empty finite vector");
}

SegmentAverageEncoder::SegmentAverageEncoder(int window) : window_(window) {
    if (window < 1) throw ContractError("phoneme window must be at least one frame");
}

MelSpectrogram SegmentAverageEncoder::encode(const MelSpectrogram& x0) const {
    const Matrix& x = x0.values();
    const Matrix centred = x.colwise() - x.rowwise().mean();
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index start = 0; start < x.cols(); start += window_) {
        const Eigen::Index len = std::min<Eigen::Index>(window_, x.cols() - start);
        const Vector avg = centred.middleCols(start, len).rowwise().mean();
        y.middleCols(start, len) = avg.replicate(1, len);
    }
    return MelSpectrogram(std::move(y), x0.frame_rate());
}

MockSpeakerEncoder::MockSpeakerEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim < 1) throw ContractError("speaker dimension must be positive");
}

SpeakerEmbedding MockSpeakerEncoder::encode(const UtteranceRecord& record) const {
    if (record.speaker_id.empty()) {
        throw ContractError("utterance '" + record.utterance_id + "' has no speaker id");
    }
    return encode_id(record.speaker_id);
}

SpeakerEmbedding MockSpeakerEncoder::encode_id(std::string_view speaker_id) const {
    if (speaker_id.empty()) throw ContractError("empty speaker id");
    Rng rng(mix_seed(seed_, fnv1a64(speaker_id)));
    Vector v = standard_normal(dim_, 1, rng);
    return SpeakerEmbedding(v / v.norm());
}

double spectral_centroid(const Matrix& log_mel) {
    const Eigen::Index n = log_mel.rows();
    if (n < 1 || log_mel.cols() < 1) throw ContractError("spectral_centroid: empty mel");
    if (n == 1) return 0.5;
    const double peak = log_mel.maxCoeff();
    const Matrix w = (log_mel.array() - peak).exp().matrix();
    const Vector per_bin = w.rowwise().sum();
    const Vector index = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
    return index.dot(per_bin) / (static_cast<double>(n - 1) * per_bin.sum());
}

double arousal_proxy(const Matrix& log_mel, const ArousalProxyConfig& config) {
    const double c = spectral_centroid(log_mel);
    return ArousalLabel::kMin +
           (ArousalLabel::kMax - ArousalLabel::kMin) * (c - config.centroid_low) / (config.centroid_high - config.centroid_low);
}

double centroid_for_arousal(double arousal, const ArousalProxyConfig& config) {
    return config.centroid_low +
           (config.centroid_high - config.centroid_low) * (arousal - ArousalLabel::kMin) / (ArousalLabel::kMax - ArousalLabel::kMin);
}

MockEmotionEncoder::MockEmotionEncoder(int dim, ArousalProxyConfig proxy) : dim_(dim), proxy_(proxy) {
    if (dim < 1) throw ContractError("emotion dimension must be positive");
    if (!(proxy_.centroid_high > proxy_.centroid_low)) throw ConfigError("arousal proxy needs centroid_high > centroid_low");
}

EmotionEmbedding MockEmotionEncoder::embed_arousal(double arousal) const {
    const double u = (arousal - 4.0) / 3.0;
    Vector e(dim_);
    e[0] = u;
    for (int j = 1; j < dim_; ++j) {
        const double freq = 0.5 + 0.25 * ((j - 1) % 8);
        const double phase = 0.37 * j;
        e[j] = std::cos(freq * u + phase);
    }
    return EmotionEmbedding(std::move(e));
}

double MockEmotionEncoder::decode_arousal(const EmotionEmbedding& e) { return 4.0 + 3.0 * e.vector()[0]; }

EmotionEmbedding MockEmotionEncoder::encode(std::string_view, const MelSpectrogram& mel) const {
    return embed_arousal(arousal_proxy(mel.values(), proxy_));
}

ArousalLabel MockEmotionEncoder::predict_arousal(std::string_view id, const MelSpectrogram& mel) const {
    return ArousalLabel::clamped(decode_arousal(encode(id, mel)));
}

CachedSpeakerEncoder::CachedSpeakerEncoder(std::shared_ptr<const EmbeddingCache> cache) : cache_(std::move(cache)) {
    if (!cache_) throw ContractError("cached speaker encoder needs a cache");
}

SpeakerEmbedding CachedSpeakerEncoder::encode(const UtteranceRecord& record) const {
    const Vector v = cache_->load(record.utterance_id).speaker.cast<double>();
    return SpeakerEmbedding(v / v.norm());
}

int CachedSpeakerEncoder::dim() const { return cache_->speaker_dim(); }

CachedEmotionEncoder::CachedEmotionEncoder(std::shared_ptr<const EmbeddingCache> cache) : cache_(std::move(cache)) {
    if (!cache_) throw ContractError("cached emotion encoder needs a cache");
}

EmotionEmbedding CachedEmotionEncoder::encode(std::string_view id, const MelSpectrogram&) const {
    return EmotionEmbedding(cache_->load(id).emotion.cast<double>());
}

ArousalLabel CachedEmotionEncoder::predict_arousal(std::string_view id, const MelSpectrogram&) const {
    return ArousalLabel::clamped(cache_->load(id).arousal_pred);
}

int CachedEmotionEncoder::dim() const { return cache_->emotion_dim(); }

EncoderSet make_mock_encoders(int speaker_dim, int emotion_dim, int phoneme_window, ArousalProxyConfig proxy,
                              std::uint64_t speaker_seed) {
    return EncoderSet{std::make_shared<SegmentAverageEncoder>(phoneme_window),
                      std::make_shared<MockSpeakerEncoder>(speaker_dim, speaker_seed),
                      std::make_shared<MockEmotionEncoder>(emotion_dim, proxy)};
}

}  // namespace moodshift
