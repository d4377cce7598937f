#pragma once

// Phoneme ("average voice"), speaker and emotion encoders. The production
// encoders are large pretrained networks that run outside this project; here
// each role is an interface with a deterministic mock and a cache-backed
// implementation that serves embeddings computed offline.

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "moodshift/manifest.hpp"
#include "moodshift/mel.hpp"

namespace moodshift {

class EmbeddingCache;

inline constexpr int kSpeakerDim = 128;
inline constexpr int kDefaultEmotionDim = 1024;

/// Unit-L2-norm speaker vector (d-vector).
class SpeakerEmbedding {
public:
    /// Throws ContractError unless |v| = 1 within 1e-6.
    explicit SpeakerEmbedding(Vector v);
    const Vector& vector() const { return v_; }

private:
    Vector v_;
};

class EmotionEmbedding {
public:
    /// Throws ContractError on non-finite entries or an empty vector.
    explicit EmotionEmbedding(Vector v);
    const Vector& vector() const { return v_; }
    Eigen::Index dim() const { return v_.size(); }

private:
    Vector v_;
};

class PhonemeEncoder {
public:
    virtual ~PhonemeEncoder() = default;
    virtual MelSpectrogram encode(const MelSpectrogram& x0) const = 0;
};

/// Removes each mel bin's utterance mean, then replaces every fixed-length
/// window of frames (the last one may be shorter) by its average.
class SegmentAverageEncoder final : public PhonemeEncoder {
public:
    explicit SegmentAverageEncoder(int window = 8);
    MelSpectrogram encode(const MelSpectrogram& x0) const override;
    int window() const { return window_; }

private:
    int window_;
};

class SpeakerEncoder {
public:
    virtual ~SpeakerEncoder() = default;
    virtual SpeakerEmbedding encode(const UtteranceRecord& record) const = 0;
    virtual int dim() const = 0;
};

/// Seeded pseudo-random unit vector keyed by speaker id.
class MockSpeakerEncoder final : public SpeakerEncoder {
public:
    explicit MockSpeakerEncoder(int dim = kSpeakerDim, std::uint64_t seed = 0x5eed5eedULL);
    SpeakerEmbedding encode(const UtteranceRecord& record) const override;
    SpeakerEmbedding encode_id(std::string_view speaker_id) const;
    int dim() const override { return dim_; }

private:
    int dim_;
    std::uint64_t seed_;
};

/// Affine map between the energy-weighted spectral centroid (normalized to
/// [0, 1] over mel bins) and the 1..7 arousal scale.
struct ArousalProxyConfig {
    double centroid_low = 0.3;   // maps to arousal 1
    double centroid_high = 0.7;  // maps to arousal 7
    bool operator==(const ArousalProxyConfig&) const = default;
};

/// sum_{m,t} m e^{X[m,t]} / ((n - 1) sum e^{X[m,t]}); 0.5 for a single bin.
double spectral_centroid(const Matrix& log_mel);

/// Unclamped arousal value of the centroid proxy.
double arousal_proxy(const Matrix& log_mel, const ArousalProxyConfig& config = {});

/// Inverse of arousal_proxy: the centroid that maps to `arousal`.
double centroid_for_arousal(double arousal, const ArousalProxyConfig& config = {});

class EmotionEncoder {
public:
    virtual ~EmotionEncoder() = default;
    /// `utterance_id` keys cache lookups; `mel` feeds acoustic encoders.
    virtual EmotionEmbedding encode(std::string_view utterance_id, const MelSpectrogram& mel) const = 0;
    virtual ArousalLabel predict_arousal(std::string_view utterance_id, const MelSpectrogram& mel) const = 0;
    virtual int dim() const = 0;
};

/// Embedding = smooth injective function of the arousal proxy. Component 0
/// is (a - 4) / 3; the others are cosines of it at fixed frequencies.
/// predict_arousal inverts component 0 and clamps to [1, 7].
class MockEmotionEncoder final : public EmotionEncoder {
public:
    explicit MockEmotionEncoder(int dim = kDefaultEmotionDim, ArousalProxyConfig proxy = {});
    EmotionEmbedding encode(std::string_view utterance_id, const MelSpectrogram& mel) const override;
    ArousalLabel predict_arousal(std::string_view utterance_id, const MelSpectrogram& mel) const override;
    int dim() const override { return dim_; }

    EmotionEmbedding embed_arousal(double arousal) const;
    /// Reads the arousal value back out of an embedding (unclamped).
    static double decode_arousal(const EmotionEmbedding& e);
    const ArousalProxyConfig& proxy() const { return proxy_; }

private:
    int dim_;
    ArousalProxyConfig proxy_;
};

/// Serves speaker vectors from an embedding cache; missing ids raise
/// MissingEmbeddingError.
class CachedSpeakerEncoder final : public SpeakerEncoder {
public:
    explicit CachedSpeakerEncoder(std::shared_ptr<const EmbeddingCache> cache);
    SpeakerEmbedding encode(const UtteranceRecord& record) const override;
    int dim() const override;

private:
    std::shared_ptr<const EmbeddingCache> cache_;
};

class CachedEmotionEncoder final : public EmotionEncoder {
public:
    explicit CachedEmotionEncoder(std::shared_ptr<const EmbeddingCache> cache);
    EmotionEmbedding encode(std::string_view utterance_id, const MelSpectrogram& mel) const override;
    ArousalLabel predict_arousal(std::string_view utterance_id, const MelSpectrogram& mel) const override;
    int dim() const override;

private:
    std::shared_ptr<const EmbeddingCache> cache_;
};

/// The three encoders used together by training and conversion.
struct EncoderSet {
    std::shared_ptr<const PhonemeEncoder> phoneme;
    std::shared_ptr<const SpeakerEncoder> speaker;
    std::shared_ptr<const EmotionEncoder> emotion;
};

EncoderSet make_mock_encoders(int speaker_dim, int emotion_dim, int phoneme_window = 8,
                              ArousalProxyConfig proxy = {}, std::uint64_t speaker_seed = 0x5eed5eedULL);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace moodshift
