#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moodshift/encoders.hpp"
#include "moodshift/manifest.hpp"
#include "moodshift/mel_features.hpp"
#include "moodshift/score_model.hpp"

namespace moodshift {

/// Which mel reconstruction term joins the score-matching loss.
enum class LambdaMode {
    None,  // score matching only
    OnXt,  // lambda_t * |X_t - X0|_1
    OnX0,  // lambda_t * |X0_hat - X0|_1 with X0_hat from the one-step Tweedie estimate
};

std::string_view to_string(LambdaMode mode);
LambdaMode parse_lambda_mode(std::string_view text);  // throws ConfigError

/// Per-sample weight on the score-matching term inside the training
/// objective. `None` is the plain ||s + eps/sigma||^2; `Variance` multiplies
/// it by sigma(t)^2, which keeps small-t samples from dominating.
enum class ScoreWeighting { None, Variance };

std::string_view to_string(ScoreWeighting weighting);
ScoreWeighting parse_score_weighting(std::string_view text);  // throws ConfigError

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    NoiseSchedule schedule{};
    int batch_size = 8;
    int n_steps = 1000;
    AdamConfig optimizer{};
    LambdaMode lambda_mode = LambdaMode::OnX0;
    ScoreWeighting score_weighting = ScoreWeighting::Variance;
    std::uint64_t rng_seed = 0;
    int checkpoint_every = 0;  // 0: only the final checkpoint
    double alpha_floor = kDefaultAlphaFloor;

    void validate() const;  // throws ConfigError
};

/// ||s_pred + eps / sigma(t)||^2 summed over entries. Throws
/// DegenerateVarianceError at t = 0.
double score_loss(const Matrix& s_pred, const Matrix& epsilon, double t, const NoiseSchedule& schedule);

/// Batch form: the mean of the per-sample losses.
double score_loss(std::span<const Matrix> s_pred, std::span<const Matrix> epsilon, std::span<const double> t,
                  const NoiseSchedule& schedule);

/// Sum of absolute entrywise differences.
double mel_loss(const Matrix& x0_hat, const Matrix& x0);

/// 1 - t^2.
double lambda_weight(double t);

/// Everything the objective needs about one utterance, precomputed once.
struct TrainingExample {
    std::string utterance_id;
    Matrix x0;
    Matrix y;
    Vector speaker;
    Vector emotion;
};

/// Per-sample randomness of one training step.
struct SampleDraw {
    double t = 0.0;
    Matrix epsilon;
};

struct LossReport {
    int step = 0;
    double score = 0.0;  // batch mean of the (weighted) score-matching term
    double mel = 0.0;    // batch mean of lambda_t * mel term (0 in LambdaMode::None)
    double total = 0.0;
    int mel_skipped = 0;  // samples whose alpha_t fell below the floor
};

/// Composite objective on a batch with fixed draws. When `grads` is non-empty
/// the parameter gradient of `total` is accumulated into it. Samples are
/// evaluated independently at their own length, so no frame padding enters
/// the loss.
struct ObjectiveOptions {
    LambdaMode mode = LambdaMode::OnX0;
    ScoreWeighting weighting = ScoreWeighting::Variance;
    double alpha_floor = kDefaultAlphaFloor;
};

LossReport batch_objective(const ScoreModel& model, std::span<const TrainingExample* const> batch,
                           std::span<const SampleDraw> draws, const ObjectiveOptions& options,
                           std::span<double> grads);

/// Draws t ~ U[t_min, t_max] and eps ~ N(0, I) for the sample at global
/// position `index` of the run.
SampleDraw draw_sample(const TrainConfig& config, const TrainingExample& example, std::uint64_t index);

class Adam {
public:
    Adam(AdamConfig config, std::size_t n_params);
    void update(std::span<double> params, std::span<const double> grads);
    long steps() const { return steps_; }

    std::vector<double>& first_moment() { return m_; }
    std::vector<double>& second_moment() { return v_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }
    void set_steps(long steps) { steps_ = steps; }

private:
    AdamConfig config_;
    std::vector<double> m_, v_;
    long steps_ = 0;
};

/// Owns the model being optimized. Batches and draws are pure functions of
/// (rng_seed, step), so a resumed run replays exactly what an uninterrupted
/// run would have done.
class Trainer {
public:
    Trainer(TrainConfig config, ScoreModel model, std::vector<TrainingExample> data);

    /// Restores model, optimizer state and step counter from a checkpoint
    /// written by checkpoint().
    static Trainer resume(TrainConfig config, const Checkpoint& checkpoint, std::vector<TrainingExample> data);

    LossReport step();
    int current_step() const { return step_; }
    const ScoreModel& model() const { return model_; }
    const TrainConfig& config() const { return config_; }
    std::span<const TrainingExample> data() const { return data_; }

    /// Indices into data() used at a given step.
    std::vector<std::size_t> batch_indices(int step) const;

    Checkpoint checkpoint() const;

private:
    TrainConfig config_;
    ScoreModel model_;
    std::vector<TrainingExample> data_;
    Adam adam_;
    int step_ = 0;
    std::vector<double> grads_;
};

/// Loads audio, extracts mels and runs the encoders for every record.
/// Unreadable records are skipped with a warning; throws ManifestError when
/// none survive.
std::vector<TrainingExample> prepare_examples(const std::filesystem::path& manifest_path,
                                              const std::vector<UtteranceRecord>& records, const EncoderSet& encoders,
                                              const MelConfig& mel_config, std::vector<std::string>* warnings = nullptr);

TrainingExample make_example(const UtteranceRecord& record, const MelSpectrogram& mel, const EncoderSet& encoders);

struct TrainRunOptions {
    std::filesystem::path out_dir;
    std::function<void(const LossReport&)> on_step;
};

/// Runs the trainer up to config.n_steps, writing `checkpoint_<step>.ckpt`
/// at the configured cadence, `final.ckpt` at the end and a step-indexed
/// `loss_log.csv`. Rows already logged past the trainer's current step are
/// dropped so that resumed runs produce the same log.
std::vector<LossReport> run_training(Trainer& trainer, const TrainRunOptions& options);

}  // namespace moodshift
