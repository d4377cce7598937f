#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "moodshift/encoders.hpp"
#include "moodshift/error.hpp"
#include "moodshift/manifest.hpp"
#include "moodshift/mel_features.hpp"
#include "moodshift/toy_dataset.hpp"
#include "moodshift/wav.hpp"
#include "test_util.hpp"

using namespace moodshift;

namespace {

void write_lines(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

// Noise through a two-pole resonator, amplitude-modulated at a syllable rate.
std::vector<double> speech_shaped_noise(int sample_rate, double seconds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const auto len = static_cast<std::size_t>(sample_rate * seconds);
    std::vector<double> out(len);
    const double pi = std::acos(-1.0);
    const double r = 0.97, f = 500.0;
    const double a1 = 2 * r * std::cos(2 * pi * f / sample_rate), a2 = -r * r;
    double y1 = 0, y2 = 0, peak = 0;
    for (std::size_t i = 0; i < len; ++i) {
        const double y = n(rng) + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        const double env = 0.6 + 0.4 * std::sin(2 * pi * 4.0 * i / sample_rate);
        out[i] = y * env;
        peak = std::max(peak, std::abs(out[i]));
    }
    for (double& v : out) v *= 0.8 / peak;
    return out;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const Eigen::VectorXd da = a.array() - a.mean(), db = b.array() - b.mean();
    return da.dot(db) / std::sqrt(da.squaredNorm() * db.squaredNorm());
}

}  // namespace

TEST(Manifest, EmptyFileGivesEmptyListAndWarning) {
    testutil::TempDir dir;
    write_lines(dir / "m.jsonl", "");
    std::vector<std::string> warnings;
    EXPECT_TRUE(load_manifest(dir / "m.jsonl", &warnings).empty());
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(Manifest, OutOfRangeArousalNamesTheRow) {
    testutil::TempDir dir;
    write_lines(dir / "m.jsonl",
                R"({"utterance_id":"a","audio_path":"a.wav","speaker_id":"s","arousal":4.0,"split":"train"})"
                "\n"
                R"({"utterance_id":"b","audio_path":"b.wav","speaker_id":"s","arousal":8.0,"split":"train"})"
                "\n");
    try {
        load_manifest(dir / "m.jsonl");
        FAIL() << "expected ManifestError";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
}

TEST(Manifest, MalformedAndDuplicateRowsAreRejected) {
    testutil::TempDir dir;
    write_lines(dir / "bad.jsonl", "{not json\n");
    EXPECT_THROW(load_manifest(dir / "bad.jsonl"), ManifestError);
    write_lines(dir / "missing.jsonl", R"({"utterance_id":"a","audio_path":"a.wav","arousal":4.0,"split":"train"})"
                                       "\n");
    EXPECT_THROW(load_manifest(dir / "missing.jsonl"), ManifestError);
    const std::string row =
        R"({"utterance_id":"a","audio_path":"a.wav","speaker_id":"s","arousal":4.0,"split":"train"})"
        "\n";
    write_lines(dir / "dup.jsonl", row + row);
    EXPECT_THROW(load_manifest(dir / "dup.jsonl"), ManifestError);
    write_lines(dir / "split.jsonl",
                R"({"utterance_id":"a","audio_path":"a.wav","speaker_id":"s","arousal":4.0,"split":"dev"})"
                "\n");
    EXPECT_THROW(load_manifest(dir / "split.jsonl"), ManifestError);
}

TEST(Manifest, RoundTripPreservesFields) {
    testutil::TempDir dir;
    std::vector<UtteranceRecord> records;
    records.push_back({"utt \"1\"", "audio/x y.wav", "spk\t1", ArousalLabel(1.0), Split::Train});
    records.push_back({"ü-2", "/abs/b.wav", "s2", ArousalLabel(6.123456789012345), Split::Valid});
    records.push_back({"c", "c.wav", "s3", ArousalLabel(7.0), Split::Test});
    save_manifest(dir / "m.jsonl", records);
    const auto back = load_manifest(dir / "m.jsonl");
    ASSERT_EQ(back.size(), records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(back[i].utterance_id, records[i].utterance_id);
        EXPECT_EQ(back[i].audio_path, records[i].audio_path);
        EXPECT_EQ(back[i].speaker_id, records[i].speaker_id);
        EXPECT_EQ(back[i].arousal.value(), records[i].arousal.value());
        EXPECT_EQ(back[i].split, records[i].split);
    }
}

TEST(ArousalLabelType, RangeAndBins) {
    EXPECT_THROW(ArousalLabel(0.99), DomainError);
    EXPECT_THROW(ArousalLabel(7.01), DomainError);
    EXPECT_EQ(ArousalLabel(3.49).bin(), 3);
    EXPECT_EQ(ArousalLabel(3.5).bin(), 4);
    EXPECT_EQ(ArousalLabel(7.0).bin(), 7);
    EXPECT_DOUBLE_EQ(ArousalLabel(4.0).normalized(), 0.5);
}

TEST(Wav, RoundTripWithinQuantization) {
    testutil::TempDir dir;
    Waveform w{{0.0, 0.5, -0.5, 0.999, -1.0, 0.123}, 16000};
    write_wav(dir / "a.wav", w);
    const Waveform back = read_wav(dir / "a.wav");
    EXPECT_EQ(back.sample_rate, 16000);
    ASSERT_EQ(back.samples.size(), w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) EXPECT_NEAR(back.samples[i], w.samples[i], 1.0 / 32767);
    write_lines(dir / "junk.wav", "RIFFxxxxWAVEjunk");
    EXPECT_THROW(read_wav(dir / "junk.wav"), FormatError);
}

TEST(MelExtract, FrameCountFollowsConfig) {
    MelConfig c;
    EXPECT_EQ(frame_count(22050, c), 1 + (22050 - 1024) / 256);
    EXPECT_EQ(frame_count(1024, c), 1);
    EXPECT_EQ(frame_count(1025, c), 1);
    EXPECT_EQ(frame_count(1280, c), 2);
    const auto samples = speech_shaped_noise(c.sample_rate, 0.5, 1);
    const MelSpectrogram m = mel_extract(samples, c);
    EXPECT_EQ(m.frames(), frame_count(samples.size(), c));
    EXPECT_EQ(m.n_mels(), 80);
    EXPECT_DOUBLE_EQ(m.frame_rate(), 22050.0 / 256.0);
}

TEST(MelExtract, ZeroWaveformSitsAtLogFloor) {
    MelConfig c;
    const MelSpectrogram m = mel_extract(std::vector<double>(4096, 0.0), c);
    EXPECT_TRUE((m.values().array() == std::log(c.log_floor)).all());
}

TEST(MelExtract, EmptyOrNonFiniteWaveformIsContractError) {
    MelConfig c;
    EXPECT_THROW(mel_extract(std::vector<double>{}, c), ContractError);
    EXPECT_THROW(mel_extract(std::vector<double>{0.0, NAN, 0.0}, c), ContractError);
}

TEST(MelExtract, DeterministicAndConfigValidated) {
    MelConfig c;
    const auto s = speech_shaped_noise(c.sample_rate, 0.3, 2);
    EXPECT_EQ(mel_extract(s, c).values(), mel_extract(s, c).values());
    MelConfig bad = c;
    bad.hop = 2048;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = c;
    bad.n_mels = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(MelInvert, RoundTripCorrelationOnSpeechShapedNoise) {
    MelConfig c;
    const auto s = speech_shaped_noise(c.sample_rate, 1.0, 3);
    const MelSpectrogram m = mel_extract(s, c);
    const Waveform w = mel_invert(m, c, 60, 0);
    EXPECT_LE(std::abs(static_cast<long>(w.samples.size()) - static_cast<long>(s.size())), c.hop);
    const MelSpectrogram m2 = mel_extract(w.samples, c);
    ASSERT_EQ(m2.frames(), m.frames());
    double sum = 0.0, worst = 1.0;
    for (Eigen::Index t = 0; t < m.frames(); ++t) {
        const double r = pearson(m.values().col(t), m2.values().col(t));
        sum += r;
        worst = std::min(worst, r);
    }
    const double mean = sum / m.frames();
    RecordProperty("mean_frame_correlation", std::to_string(mean));
    EXPECT_GE(mean, 0.9);
    EXPECT_GE(worst, 0.9);
}

TEST(ToyDataset, LabelsMatchProxyAndAreDeterministic) {
    ToyDatasetConfig cfg;
    cfg.n_utts = 60;
    cfg.mel = MelConfig{8000, 256, 128, 16};
    const auto a = synthesize_toy_dataset(cfg);
    const auto b = synthesize_toy_dataset(cfg);
    ASSERT_EQ(a.size(), 60u);
    const MockEmotionEncoder ser(8, cfg.proxy);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].audio.samples, b[i].audio.samples);
        EXPECT_EQ(a[i].record.arousal.value(), b[i].record.arousal.value());
        const MelSpectrogram mel = mel_extract(a[i].audio.samples, cfg.mel);
        EXPECT_NEAR(ser.predict_arousal(a[i].record.utterance_id, mel).value(), a[i].record.arousal.value(), 0.05);
        EXPECT_GE(mel.frames(), cfg.min_frames);
        EXPECT_LE(mel.frames(), cfg.max_frames);
    }
}

TEST(ToyDataset, LabelStatisticsAtThousandUtterances) {
    ToyDatasetConfig cfg;
    cfg.n_utts = 1000;
    cfg.mel = MelConfig{8000, 256, 128, 16};
    const auto data = synthesize_toy_dataset(cfg);
    std::vector<double> labels;
    for (const auto& u : data) labels.push_back(u.record.arousal.value());
    const double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / labels.size();
    double var = 0.0;
    for (double l : labels) var += (l - mean) * (l - mean);
    const double sd = std::sqrt(var / (labels.size() - 1));
    EXPECT_NEAR(mean, 4.0, 0.1);
    EXPECT_NEAR(sd, 0.95, 0.1);
}

TEST(ToyDataset, WritesAudioAndManifest) {
    testutil::TempDir dir;
    ToyDatasetConfig cfg;
    cfg.n_utts = 12;
    cfg.mel = MelConfig{8000, 256, 128, 16};
    const auto records = make_toy_dataset(cfg, dir.path());
    const auto loaded = load_manifest(dir / "manifest.jsonl");
    ASSERT_EQ(loaded.size(), records.size());
    for (const auto& r : loaded) {
        const Waveform w = read_wav(resolve_audio_path(dir / "manifest.jsonl", r));
        EXPECT_EQ(w.sample_rate, 8000);
    }
    int train = 0;
    for (const auto& r : loaded) train += r.split == Split::Train;
    EXPECT_GT(train, 0);
}

TEST(ToyDataset, UnwritableOutputDirectoryFails) {
    testutil::TempDir dir;
    write_lines(dir / "file", "x");
    ToyDatasetConfig cfg;
    cfg.n_utts = 2;
    cfg.mel = MelConfig{8000, 256, 128, 16};
    EXPECT_ANY_THROW(make_toy_dataset(cfg, dir / "file" / "sub"));
}
