#pragma once

// One declarative run configuration covering every module. Resolution order
// is defaults, then the config file, then dotted-key overrides from the
// command line; keys that the defaults do not know are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "moodshift/encoders.hpp"
#include "moodshift/mel_features.hpp"
#include "moodshift/pitch.hpp"
#include "moodshift/score_model.hpp"
#include "moodshift/toy_dataset.hpp"
#include "moodshift/training.hpp"

namespace moodshift {

struct SeedConfig {
    std::uint64_t data = 1234;
    std::uint64_t init = 1;
    std::uint64_t training = 2;
    std::uint64_t inference = 3;
    std::uint64_t vocoder = 4;

    /// Derives every stream from one value.
    static SeedConfig from_base(std::uint64_t base);
};

struct EncoderConfig {
    int speaker_dim = kSpeakerDim;
    int emotion_dim = kDefaultEmotionDim;
    int phoneme_window = 8;
    std::uint64_t speaker_seed = 0x5eed5eedULL;
    ArousalProxyConfig proxy{};
};

struct ModelShape {
    int base_channels = 32;
    int depth = 2;
    int time_embed_dim = 64;
};

struct InferenceConfig {
    int n_steps = 50;
    double bank_p = 0.2;
    bool printed_diffusion = false;
    bool allow_bin_fallback = false;
    std::vector<int> targets{1, 2, 3, 4, 5, 6, 7};
    std::string bank_split = "train";
    std::string source_split = "test";
    int griffin_lim_iters = 60;
};

struct EvalConfig {
    PitchConfig pitch{};
    std::string quality_scores;  // recorded-scores file; empty means no scorer
};

struct SimulateConfig {
    double x0 = 2.0;
    double y = 0.0;
    int n_paths = 10000;
    int n_steps = 1000;
    std::vector<double> times{0.25, 0.5, 0.75, 1.0};
};

struct PathsConfig {
    std::string run_dir = "runs/default";
    std::string data_dir;  // empty: <run_dir>/data
};

struct RunConfig {
    SeedConfig seeds{};
    NoiseSchedule schedule{};
    MelConfig mel{};
    ToyDatasetConfig toy{};  // its mel, proxy and seed fields are taken from the sections above
    EncoderConfig encoders{};
    ModelShape model{};
    TrainConfig training{};  // its schedule and seed come from the sections above
    InferenceConfig inference{};
    EvalConfig eval{};
    SimulateConfig simulate{};
    PathsConfig paths{};
    bool strict_determinism = false;

    ScoreModelConfig model_config() const;
    TrainConfig train_config() const;
    ToyDatasetConfig toy_config() const;
    EncoderSet encoder_set() const;
    std::filesystem::path data_dir() const;

    void validate() const;  // throws ConfigError
};

/// Dotted key and raw value, e.g. {"training.n_steps", "200"}. The value is
/// read as JSON when it parses, otherwise as a string.
struct ConfigOverride {
    std::string key;
    std::string value;
};

ConfigOverride parse_override(const std::string& text);  // "key=value"; throws ConfigError

/// Resolved configuration as a JSON document.
std::string config_to_json(const RunConfig& config);
RunConfig config_from_json(const std::string& text);  // throws ConfigError

RunConfig resolve_config(const std::filesystem::path& file, const std::vector<ConfigOverride>& overrides);

/// FNV-1a of the canonical resolved document, as 16 hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace moodshift
