#include "moodshift/embedding_cache.hpp"

#include <cstring>
#include <fstream>
#include <mutex>

#include "moodshift/binary_io.hpp"
#include "moodshift/error.hpp"

namespace moodshift {

namespace {
constexpr char kMagic[8] = {'M', 'S', 'E', 'M', 'B', 'C', '0', '1'};
}

EmbeddingCache::EmbeddingCache(int speaker_dim, int emotion_dim)
    : speaker_dim_(speaker_dim), emotion_dim_(emotion_dim) {
    if (speaker_dim < 1 || emotion_dim < 1) throw ContractError("embedding dimensions must be positive");
}

EmbeddingCache::EmbeddingCache(const EmbeddingCache& other)
    : speaker_dim_(other.speaker_dim_), emotion_dim_(other.emotion_dim_) {
    std::shared_lock lock(other.mutex_);
    entries_ = other.entries_;
}

std::size_t EmbeddingCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

bool EmbeddingCache::contains(std::string_view utterance_id) const {
    std::shared_lock lock(mutex_);
    return entries_.find(utterance_id) != entries_.end();
}

void EmbeddingCache::store(const std::string& utterance_id, CachedEmbeddings embeddings) {
    if (embeddings.speaker.size() != speaker_dim_) {
        throw DimensionMismatchError("speaker embedding for '" + utterance_id + "' has dimension " +
                                     std::to_string(embeddings.speaker.size()) + ", cache expects " +
                                     std::to_string(speaker_dim_));
    }
    if (embeddings.emotion.size() != emotion_dim_) {
        throw DimensionMismatchError("emotion embedding for '" + utterance_id + "' has dimension " +
                                     std::to_string(embeddings.emotion.size()) + ", cache expects " +
                                     std::to_string(emotion_dim_));
    }
    std::unique_lock lock(mutex_);
    entries_[utterance_id] = std::move(embeddings);
}

CachedEmbeddings EmbeddingCache::load(std::string_view utterance_id) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(utterance_id);
    if (it == entries_.end()) {
        throw MissingEmbeddingError("no cached embeddings for utterance '" + std::string(utterance_id) + "'");
    }
    return it->second;
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write embedding cache " + path.string());
    BinaryWriter w(os);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(speaker_dim_));
    w.u32(static_cast<std::uint32_t>(emotion_dim_));
    std::shared_lock lock(mutex_);
    w.u64(entries_.size());
    for (const auto& [id, e] : entries_) {
        w.string(id);
        for (float v : e.speaker) w.f32(v);
        for (float v : e.emotion) w.f32(v);
        w.f32(e.arousal_pred);
    }
    if (!os) throw IoError("failed writing embedding cache " + path.string());
}

EmbeddingCache EmbeddingCache::read(const std::filesystem::path& path, std::optional<int> expected_speaker_dim,
                                    std::optional<int> expected_emotion_dim) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open embedding cache " + path.string());
    BinaryReader r(is, path.string());
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError(path.string() + ": not an embedding cache");
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw FormatError(path.string() + ": unsupported embedding cache version " + std::to_string(version));
    }
    const auto speaker_dim = static_cast<int>(r.u32());
    const auto emotion_dim = static_cast<int>(r.u32());
    if (expected_speaker_dim && *expected_speaker_dim != speaker_dim) {
        throw DimensionMismatchError(path.string() + ": speaker dimension " + std::to_string(speaker_dim) +
                                     " does not match configured " + std::to_string(*expected_speaker_dim));
    }
    if (expected_emotion_dim && *expected_emotion_dim != emotion_dim) {
        throw DimensionMismatchError(path.string() + ": emotion dimension " + std::to_string(emotion_dim) +
                                     " does not match configured " + std::to_string(*expected_emotion_dim));
    }
    EmbeddingCache cache(speaker_dim, emotion_dim);
    const std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string id = r.string();
        CachedEmbeddings e;
        e.speaker.resize(speaker_dim);
        e.emotion.resize(emotion_dim);
        for (int k = 0; k < speaker_dim; ++k) e.speaker[k] = r.f32();
        for (int k = 0; k < emotion_dim; ++k) e.emotion[k] = r.f32();
        e.arousal_pred = r.f32();
        cache.entries_.emplace(std::move(id), std::move(e));
    }
    return cache;
}

}  // namespace moodshift
