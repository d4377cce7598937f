#pragma once

// File-backed store of per-utterance embeddings computed by external encoders.
//
// On-disk layout (little-endian):
//   char[8]  magic "MSEMBC01"
//   u32      version (1)
//   u32      speaker_dim
//   u32      emotion_dim
//   u64      record count
//   records, sorted by utterance id:
//     u32    id byte length, followed by the UTF-8 id bytes
//     f32    speaker_vec[speaker_dim]
//     f32    emotion_vec[emotion_dim]
//     f32    arousal_pred

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace moodshift {

struct CachedEmbeddings {
    Eigen::VectorXf speaker;
    Eigen::VectorXf emotion;
    float arousal_pred = 0.0f;
};

class EmbeddingCache {
public:
    static constexpr std::uint32_t kVersion = 1;

    EmbeddingCache(int speaker_dim, int emotion_dim);
    EmbeddingCache(const EmbeddingCache& other);

    int speaker_dim() const { return speaker_dim_; }
    int emotion_dim() const { return emotion_dim_; }
    std::size_t size() const;
    bool contains(std::string_view utterance_id) const;

    /// Throws DimensionMismatchError when vector sizes disagree with the cache.
    void store(const std::string& utterance_id, CachedEmbeddings embeddings);
    /// Throws MissingEmbeddingError naming the id.
    CachedEmbeddings load(std::string_view utterance_id) const;

    void save(const std::filesystem::path& path) const;
    /// Throws FormatError on a corrupt file and DimensionMismatchError when the
    /// stored dimensions differ from the expected ones (if given).
    static EmbeddingCache read(const std::filesystem::path& path, std::optional<int> expected_speaker_dim = {},
                               std::optional<int> expected_emotion_dim = {});

private:
    int speaker_dim_;
    int emotion_dim_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, CachedEmbeddings, std::less<>> entries_;
};

}  // namespace moodshift
