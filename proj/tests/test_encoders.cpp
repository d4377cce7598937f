#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "moodshift/embedding_cache.hpp"
#include "moodshift/encoders.hpp"
#include "moodshift/error.hpp"
#include "test_util.hpp"

using namespace moodshift;

namespace {

UtteranceRecord record(const std::string& id, const std::string& speaker) {
    return {id, id + ".wav", speaker, ArousalLabel(4.0), Split::Train};
}

// Log-mel whose energy sits in a single bin.
Matrix single_bin(int n, int bin, int frames = 4) {
    Matrix m = Matrix::Constant(n, frames, -40.0);
    m.row(bin).setZero();
    return m;
}

}  // namespace

TEST(SpeakerEncoder, UnitNormDeterministicAndDistinct) {
    const MockSpeakerEncoder enc(128);
    const auto a = enc.encode(record("u1", "alice"));
    const auto b = enc.encode(record("u2", "alice"));
    const auto c = enc.encode(record("u3", "bob"));
    EXPECT_EQ(a.vector().size(), 128);
    EXPECT_NEAR(a.vector().norm(), 1.0, 1e-12);
    EXPECT_EQ(a.vector(), b.vector());
    EXPECT_LT(std::abs(a.vector().dot(c.vector())), 0.5);
}

TEST(SpeakerEncoder, MissingSpeakerIdIsContractError) {
    const MockSpeakerEncoder enc(16);
    EXPECT_THROW(enc.encode(record("u1", "")), ContractError);
    EXPECT_THROW(SpeakerEmbedding(Vector::Constant(3, 1.0)), ContractError);
}

TEST(ArousalProxy, CentroidOfSingleBins) {
    EXPECT_NEAR(spectral_centroid(single_bin(11, 0)), 0.0, 1e-12);
    EXPECT_NEAR(spectral_centroid(single_bin(11, 10)), 1.0, 1e-12);
    EXPECT_NEAR(spectral_centroid(single_bin(11, 5)), 0.5, 1e-12);
    EXPECT_DOUBLE_EQ(spectral_centroid(Matrix::Zero(1, 3)), 0.5);
    // Large log values must not overflow.
    EXPECT_NEAR(spectral_centroid(single_bin(11, 5).array() + 800.0), 0.5, 1e-12);
}

TEST(ArousalProxy, AffineMapAndInverse) {
    const ArousalProxyConfig cfg{0.3, 0.7};
    EXPECT_NEAR(centroid_for_arousal(1.0, cfg), 0.3, 1e-12);
    EXPECT_NEAR(centroid_for_arousal(7.0, cfg), 0.7, 1e-12);
    for (double a : {1.0, 2.5, 4.0, 6.9}) {
        // Two bins: centroid = w_hi / (w_lo + w_hi).
        const double c = centroid_for_arousal(a, cfg);
        Matrix m(2, 1);
        m << std::log(1.0 - c), std::log(c);
        EXPECT_NEAR(arousal_proxy(m, cfg), a, 1e-9);
    }
}

TEST(EmotionEncoder, EmbeddingEncodesArousalInjectively) {
    const MockEmotionEncoder enc(1024);
    EXPECT_EQ(enc.dim(), 1024);
    for (double a : {1.0, 3.3, 4.0, 6.5, 7.0}) {
        const auto e = enc.embed_arousal(a);
        EXPECT_EQ(e.dim(), 1024);
        EXPECT_NEAR(MockEmotionEncoder::decode_arousal(e), a, 1e-12);
    }
    EXPECT_GT((enc.embed_arousal(2.0).vector() - enc.embed_arousal(2.1).vector()).norm(), 0.0);
}

TEST(EmotionEncoder, PredictionClampsToScale) {
    const MockEmotionEncoder enc(8);
    const MelSpectrogram low(single_bin(16, 0));
    const MelSpectrogram high(single_bin(16, 15));
    EXPECT_DOUBLE_EQ(enc.predict_arousal("x", low).value(), 1.0);
    EXPECT_DOUBLE_EQ(enc.predict_arousal("x", high).value(), 7.0);
    const auto e = enc.encode("x", high);
    EXPECT_GT(MockEmotionEncoder::decode_arousal(e), 7.0);  // the embedding itself is not clamped
}

TEST(PhonemeEncoder, RemovesBinMeansAndAveragesWindows) {
    const SegmentAverageEncoder enc(4);
    Matrix x(2, 6);
    x << 1, 2, 3, 4, 5, 6,  //
        10, 10, 10, 10, 30, 30;
    const MelSpectrogram y = enc.encode(MelSpectrogram(x, 50.0));
    ASSERT_EQ(y.n_mels(), 2);
    ASSERT_EQ(y.frames(), 6);
    EXPECT_DOUBLE_EQ(y.frame_rate(), 50.0);
    // Row 0 mean 3.5: windows {1..4} -> 2.5 - 3.5, {5,6} -> 5.5 - 3.5.
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(y.values()(0, t), -1.0, 1e-12);
    for (int t = 4; t < 6; ++t) EXPECT_NEAR(y.values()(0, t), 2.0, 1e-12);
    // Row 1 mean 50/3.
    for (int t = 0; t < 4; ++t) EXPECT_NEAR(y.values()(1, t), 10.0 - 50.0 / 3.0, 1e-12);
    EXPECT_NEAR(y.values().row(0).mean(), 0.0, 1e-12);
    EXPECT_THROW(SegmentAverageEncoder(0), ContractError);
}

TEST(PhonemeEncoder, IndependentOfPerBinOffsets) {
    const SegmentAverageEncoder enc(8);
    const Matrix x = Matrix::Random(5, 20);
    Matrix shifted = x;
    for (int r = 0; r < 5; ++r) shifted.row(r).array() += 0.7 * r - 2.0;
    EXPECT_LT((enc.encode(MelSpectrogram(x)).values() - enc.encode(MelSpectrogram(shifted)).values()).norm(), 1e-12);
}

TEST(EmbeddingCache, RoundTripAndMissing) {
    testutil::TempDir dir;
    EmbeddingCache cache(3, 2);
    cache.store("b", {Eigen::Vector3f(1, 0, 0), Eigen::Vector2f(0.5f, -1.f), 4.5f});
    cache.store("a", {Eigen::Vector3f(0, 1, 0), Eigen::Vector2f(2.f, 3.f), 2.0f});
    EXPECT_THROW(cache.store("c", {Eigen::Vector2f(1, 0), Eigen::Vector2f(0, 0), 1.f}), DimensionMismatchError);
    cache.save(dir / "c.bin");
    const EmbeddingCache back = EmbeddingCache::read(dir / "c.bin", 3, 2);
    EXPECT_EQ(back.size(), 2u);
    EXPECT_EQ(back.load("a").emotion, Eigen::Vector2f(2.f, 3.f));
    EXPECT_FLOAT_EQ(back.load("b").arousal_pred, 4.5f);
    EXPECT_THROW(back.load("zzz"), MissingEmbeddingError);
    EXPECT_THROW(EmbeddingCache::read(dir / "c.bin", 4, 2), DimensionMismatchError);
}

TEST(EmbeddingCache, CorruptFilesAreFormatErrors) {
    testutil::TempDir dir;
    {
        std::ofstream os(dir / "bad.bin", std::ios::binary);
        os << "NOTACACHE";
    }
    EXPECT_THROW(EmbeddingCache::read(dir / "bad.bin"), FormatError);
    EmbeddingCache cache(2, 2);
    cache.store("a", {Eigen::Vector2f(1, 0), Eigen::Vector2f(0, 1), 3.f});
    cache.save(dir / "ok.bin");
    std::filesystem::resize_file(dir / "ok.bin", std::filesystem::file_size(dir / "ok.bin") - 3);
    EXPECT_THROW(EmbeddingCache::read(dir / "ok.bin"), FormatError);
}

TEST(CachedEncoders, ServeStoredVectors) {
    auto cache = std::make_shared<EmbeddingCache>(2, 3);
    const float s = std::sqrt(0.5f);
    cache->store("u1", {Eigen::Vector2f(s, s), Eigen::Vector3f(1, 2, 3), 5.5f});
    const CachedSpeakerEncoder spk(cache);
    const CachedEmotionEncoder emo(cache);
    const MelSpectrogram dummy(Matrix::Zero(2, 2));
    EXPECT_NEAR(spk.encode(record("u1", "x")).vector().norm(), 1.0, 1e-6);
    EXPECT_EQ(emo.encode("u1", dummy).vector(), Eigen::Vector3d(1, 2, 3));
    EXPECT_NEAR(emo.predict_arousal("u1", dummy).value(), 5.5, 1e-6);
    EXPECT_THROW(emo.encode("u2", dummy), MissingEmbeddingError);
    EXPECT_EQ(spk.dim(), 2);
    EXPECT_EQ(emo.dim(), 3);
}
