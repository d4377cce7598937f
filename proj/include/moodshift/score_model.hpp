#pragma once

// Conditional score network s(X_t, Y, speaker, emotion, t).
//
// A 1-D U-Net runs over time with mel bins as input channels. Its input is
// the residual Z = X_t - Y stacked with Y; its output D is an estimate of
// X0 - Y, which is turned into a score through the kernel identity
//
//   score = (alpha_t D - Z) / sigma_t^2,
//
// exact when D equals the true X0 - Y. Time (sinusoidal + MLP), speaker and
// emotion vectors are projected into one conditioning vector that is added as
// a per-channel bias inside every residual block.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "moodshift/mel.hpp"
#include "moodshift/nn.hpp"
#include "moodshift/sde.hpp"

namespace moodshift {

struct ScoreModelConfig {
    int n_mels = 80;
    int base_channels = 32;
    int depth = 2;
    int time_embed_dim = 64;
    int speaker_dim = 128;
    int emotion_dim = 1024;

    void validate() const;  // throws ConfigError
    bool operator==(const ScoreModelConfig&) const = default;
};

struct ConditioningBundle {
    Matrix y;
    Vector speaker;
    Vector emotion;
    double t = 0.0;
};

class ScoreModel {
public:
    /// Activations kept by forward() for backward().
    struct Tape {
        Eigen::Index frames = 0;
        Eigen::Index padded = 0;
        double t = 0.0;
        Vector speaker, emotion;
        Vector time_emb, time_h1, cond_raw, cond;
        Matrix input, col_in;
        std::vector<nn::ResBlock::Cache> down, up;
        nn::ResBlock::Cache mid;
        Matrix out_pre, col_out;
        Matrix denoised;  // D, cropped to the input length
    };

    ScoreModel(ScoreModelConfig config, NoiseSchedule schedule);

    /// Parameters drawn from a seeded uniform fan-in initialization.
    static ScoreModel init(const ScoreModelConfig& config, const NoiseSchedule& schedule, std::uint64_t seed);

    const ScoreModelConfig& config() const { return config_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const double> parameters() const { return params_; }
    std::span<double> parameters() { return params_; }

    /// Score field with the shape of x_t. Throws ContractError on shape
    /// mismatch, wrong conditioning sizes, non-finite inputs or t outside (0, 1].
    Matrix evaluate(const Matrix& x_t, const ConditioningBundle& cond) const;

    /// Same as evaluate but records what backward needs.
    Matrix forward(const Matrix& x_t, const ConditioningBundle& cond, Tape& tape) const;

    /// Accumulates d loss / d parameters into `grads` given d loss / d score.
    void backward(const Tape& tape, const Matrix& d_score, std::span<double> grads) const;

    std::vector<std::uint8_t> serialize() const;
    static ScoreModel deserialize(std::span<const std::uint8_t> bytes);

private:
    void build();
    void check_inputs(const Matrix& x_t, const ConditioningBundle& cond) const;

    ScoreModelConfig config_;
    NoiseSchedule schedule_;
    std::vector<double> params_;

    nn::Linear time_fc1_, time_fc2_, speaker_proj_, emotion_proj_;
    nn::Conv1d conv_in_, conv_out_;
    std::vector<nn::ResBlock> down_, up_;
    nn::ResBlock mid_;
    std::vector<int> channels_;
};

// Versioned checkpoint container. Layout (little-endian):
//   char[8] magic "MSCKPT01", u32 version, u32 header length, header JSON
//   (model config, schedule, free-form metadata), u32 section count, then per
//   section: u32 name length, name, u64 element count, f64 data.
// Section "params" holds the model parameters; training adds optimizer state.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    ScoreModelConfig config;
    NoiseSchedule schedule;
    std::string metadata_json = "{}";
    std::map<std::string, std::vector<double>> sections;

    void write(const std::filesystem::path& path) const;
    std::vector<std::uint8_t> to_bytes() const;
    /// Throws FormatError on bad magic, unknown version or truncation.
    static Checkpoint read(const std::filesystem::path& path);
    static Checkpoint from_bytes(std::span<const std::uint8_t> bytes);

    ScoreModel model() const;
    static Checkpoint of(const ScoreModel& model);
};

}  // namespace moodshift
