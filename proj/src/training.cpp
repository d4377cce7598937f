#include "moodshift/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "moodshift/error.hpp"
#include "moodshift/random.hpp"
#include "moodshift/wav.hpp"

namespace moodshift {

using nlohmann::json;

std::string_view to_string(LambdaMode mode) {
    switch (mode) {
        case LambdaMode::None: return "none";
        case LambdaMode::OnXt: return "on_xt";
        case LambdaMode::OnX0: return "on_x0";
    }
    return "none";
}

LambdaMode parse_lambda_mode(std::string_view text) {
    if (text == "none") return LambdaMode::None;
    if (text == "on_xt") return LambdaMode::OnXt;
    if (text == "on_x0") return LambdaMode::OnX0;
    throw ConfigError("unknown lambda_mode '" + std::string(text) + "' (expected none, on_xt or on_x0)");
}

std::string_view to_string(ScoreWeighting weighting) {
    return weighting == ScoreWeighting::Variance ? "variance" : "none";
}

ScoreWeighting parse_score_weighting(std::string_view text) {
    if (text == "none") return ScoreWeighting::None;
    if (text == "variance") return ScoreWeighting::Variance;
    throw ConfigError("unknown score_weighting '" + std::string(text) + "' (expected none or variance)");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("training.batch_size must be >= 1");
    if (n_steps < 1) throw ConfigError("training.n_steps must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
    if (checkpoint_every < 0) throw ConfigError("training.checkpoint_every must be >= 0");
    if (!(alpha_floor > 0.0 && alpha_floor < 1.0)) throw ConfigError("training.alpha_floor must be in (0, 1)");
}

double score_loss(const Matrix& s_pred, const Matrix& epsilon, double t, const NoiseSchedule& schedule) {
    require_same_shape(s_pred, epsilon, "score_loss");
    const double sigma = schedule.sigma(t);
    if (!(sigma > 0.0)) throw DegenerateVarianceError("score loss is undefined at t = 0");
    return (s_pred + epsilon / sigma).squaredNorm();
}

double score_loss(std::span<const Matrix> s_pred, std::span<const Matrix> epsilon, std::span<const double> t,
                  const NoiseSchedule& schedule) {
    if (s_pred.size() != epsilon.size() || s_pred.size() != t.size() || s_pred.empty()) {
        throw ContractError("score_loss: batch sizes disagree or batch is empty");
    }
    double sum = 0.0;
    for (std::size_t b = 0; b < s_pred.size(); ++b) sum += score_loss(s_pred[b], epsilon[b], t[b], schedule);
    return sum / static_cast<double>(s_pred.size());
}

double mel_loss(const Matrix& x0_hat, const Matrix& x0) {
    require_same_shape(x0_hat, x0, "mel_loss");
    return (x0_hat - x0).cwiseAbs().sum();
}

double lambda_weight(double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("lambda_weight: t outside [0, 1]");
    return 1.0 - t * t;
}

LossReport batch_objective(const ScoreModel& model, std::span<const TrainingExample* const> batch,
                           std::span<const SampleDraw> draws, const ObjectiveOptions& options,
                           std::span<double> grads) {
    if (batch.empty() || batch.size() != draws.size()) throw ContractError("batch_objective: bad batch");
    const NoiseSchedule& schedule = model.schedule();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    LossReport report;
    ScoreModel::Tape tape;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TrainingExample& ex = *batch[b];
        const SampleDraw& draw = draws[b];
        const double t = draw.t;
        const double sigma = schedule.sigma(t);
        if (!(sigma > 0.0)) throw DegenerateVarianceError("training sample drawn at t = 0");
        const Matrix x_t = mean_evolution(ex.x0, ex.y, t, schedule) + sigma * draw.epsilon;
        const ConditioningBundle cond{ex.y, ex.speaker, ex.emotion, t};
        const Matrix s = model.forward(x_t, cond, tape);

        const Matrix residual = s + draw.epsilon / sigma;
        const double w = options.weighting == ScoreWeighting::Variance ? sigma * sigma : 1.0;
        report.score += inv_b * w * residual.squaredNorm();
        Matrix d_s = (2.0 * inv_b * w) * residual;

        const double lambda = lambda_weight(t);
        if (options.mode == LambdaMode::OnX0) {
            const double alpha = schedule.alpha(t);
            if (alpha < options.alpha_floor) {
                ++report.mel_skipped;
            } else {
                const Matrix x0_hat = tweedie_x0(x_t, s, ex.y, t, schedule, options.alpha_floor);
                report.mel += inv_b * lambda * mel_loss(x0_hat, ex.x0);
                const Matrix sign = (x0_hat - ex.x0).unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
                // d X0_hat / d score = sigma^2 / alpha, elementwise.
                d_s += (inv_b * lambda * schedule.variance(t) / alpha) * sign;
            }
        } else if (options.mode == LambdaMode::OnXt) {
            // X_t does not depend on the parameters; the term shifts the loss only.
            report.mel += inv_b * lambda * mel_loss(x_t, ex.x0);
        }
        if (!grads.empty()) model.backward(tape, d_s, grads);
    }
    report.total = report.score + report.mel;
    return report;
}

SampleDraw draw_sample(const TrainConfig& config, const TrainingExample& example, std::uint64_t index) {
    Rng rng(mix_seed(config.rng_seed, index));
    std::uniform_real_distribution<double> time_dist(config.schedule.t_min(), config.schedule.t_max());
    SampleDraw d;
    d.t = time_dist(rng);
    d.epsilon = standard_normal(example.x0.rows(), example.x0.cols(), rng);
    return d;
}

Adam::Adam(AdamConfig config, std::size_t n_params) : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void Adam::update(std::span<double> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) throw ContractError("Adam: size mismatch");
    ++steps_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
        params[i] -= config_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
    }
}

Trainer::Trainer(TrainConfig config, ScoreModel model, std::vector<TrainingExample> data)
    : config_(std::move(config)),
      model_(std::move(model)),
      data_(std::move(data)),
      adam_(config_.optimizer, model_.parameter_count()),
      grads_(model_.parameter_count(), 0.0) {
    config_.validate();
    if (data_.empty()) throw ContractError("trainer needs at least one training example");
    if (!(model_.schedule() == config_.schedule)) throw ConfigError("model and training schedules differ");
}

Trainer Trainer::resume(TrainConfig config, const Checkpoint& checkpoint, std::vector<TrainingExample> data) {
    Trainer trainer(std::move(config), checkpoint.model(), std::move(data));
    const json meta = json::parse(checkpoint.metadata_json);
    const auto m = checkpoint.sections.find("adam_m");
    const auto v = checkpoint.sections.find("adam_v");
    if (m == checkpoint.sections.end() || v == checkpoint.sections.end() || !meta.contains("step")) {
        throw FormatError("checkpoint carries no optimizer state; it cannot be resumed");
    }
    if (m->second.size() != trainer.model_.parameter_count() || v->second.size() != trainer.model_.parameter_count()) {
        throw FormatError("optimizer state size does not match the model");
    }
    trainer.adam_.first_moment() = m->second;
    trainer.adam_.second_moment() = v->second;
    trainer.adam_.set_steps(meta.at("adam_steps").get<long>());
    trainer.step_ = meta.at("step").get<int>();
    return trainer;
}

std::vector<std::size_t> Trainer::batch_indices(int step) const {
    const std::size_t n = data_.size();
    const auto b = static_cast<std::size_t>(config_.batch_size);
    std::vector<std::size_t> out;
    out.reserve(b);
    std::size_t cached_epoch = static_cast<std::size_t>(-1);
    std::vector<std::size_t> perm(n);
    for (std::size_t k = static_cast<std::size_t>(step) * b; k < static_cast<std::size_t>(step + 1) * b; ++k) {
        const std::size_t epoch = k / n;
        if (epoch != cached_epoch) {
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            Rng rng(mix_seed(config_.rng_seed ^ 0xA5A5A5A5ULL, epoch));
            std::shuffle(perm.begin(), perm.end(), rng);
            cached_epoch = epoch;
        }
        out.push_back(perm[k % n]);
    }
    return out;
}

LossReport Trainer::step() {
    const auto idx = batch_indices(step_);
    std::vector<const TrainingExample*> batch;
    std::vector<SampleDraw> draws;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        batch.push_back(&data_[idx[b]]);
        draws.push_back(draw_sample(config_, data_[idx[b]],
                                    static_cast<std::uint64_t>(step_) * idx.size() + b));
    }
    std::fill(grads_.begin(), grads_.end(), 0.0);
    const ObjectiveOptions options{config_.lambda_mode, config_.score_weighting, config_.alpha_floor};
    LossReport report = batch_objective(model_, batch, draws, options, grads_);
    adam_.update(model_.parameters(), grads_);
    ++step_;
    report.step = step_;
    return report;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c = Checkpoint::of(model_);
    c.sections["adam_m"] = adam_.first_moment();
    c.sections["adam_v"] = adam_.second_moment();
    c.metadata_json = json{{"step", step_},
                           {"adam_steps", adam_.steps()},
                           {"lambda_mode", std::string(to_string(config_.lambda_mode))},
                           {"score_weighting", std::string(to_string(config_.score_weighting))},
                           {"rng_seed", config_.rng_seed}}
                          .dump();
    return c;
}

TrainingExample make_example(const UtteranceRecord& record, const MelSpectrogram& mel, const EncoderSet& encoders) {
    TrainingExample ex;
    ex.utterance_id = record.utterance_id;
    ex.x0 = mel.values();
    ex.y = encoders.phoneme->encode(mel).values();
    ex.speaker = encoders.speaker->encode(record).vector();
    ex.emotion = encoders.emotion->encode(record.utterance_id, mel).vector();
    return ex;
}

std::vector<TrainingExample> prepare_examples(const std::filesystem::path& manifest_path,
                                              const std::vector<UtteranceRecord>& records, const EncoderSet& encoders,
                                              const MelConfig& mel_config, std::vector<std::string>* warnings) {
    std::vector<TrainingExample> out;
    for (const auto& r : records) {
        try {
            const Waveform wave = read_wav(resolve_audio_path(manifest_path, r));
            if (wave.sample_rate != mel_config.sample_rate) {
                throw FormatError("sample rate " + std::to_string(wave.sample_rate) + " differs from configured " +
                                  std::to_string(mel_config.sample_rate));
            }
            out.push_back(make_example(r, mel_extract(wave.samples, mel_config), encoders));
        } catch (const Error& e) {
            if (warnings) warnings->push_back("skipping '" + r.utterance_id + "': " + e.what());
        }
    }
    if (out.empty()) throw ManifestError("no usable training records in " + manifest_path.string());
    return out;
}

namespace {

std::string format_row(const LossReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d", r.step, r.score, r.mel, r.total, r.mel_skipped);
    return buf;
}

}  // namespace

std::vector<LossReport> run_training(Trainer& trainer, const TrainRunOptions& options) {
    std::filesystem::create_directories(options.out_dir);
    const auto log_path = options.out_dir / "loss_log.csv";
    std::vector<std::string> kept;
    if (trainer.current_step() > 0) {
        std::ifstream is(log_path);
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            if (std::stoi(line.substr(0, line.find(','))) <= trainer.current_step()) kept.push_back(line);
        }
    }
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    log << "step,score_loss,mel_loss,total_loss,mel_skipped\n";
    for (const auto& line : kept) log << line << '\n';

    std::vector<LossReport> reports;
    const int every = trainer.config().checkpoint_every;
    while (trainer.current_step() < trainer.config().n_steps) {
        const LossReport r = trainer.step();
        if (!std::isfinite(r.total)) throw DivergenceError("training loss became non-finite at step " + std::to_string(r.step));
        log << format_row(r) << '\n';
        reports.push_back(r);
        if (options.on_step) options.on_step(r);
        if (every > 0 && r.step % every == 0) {
            trainer.checkpoint().write(options.out_dir / ("checkpoint_" + std::to_string(r.step) + ".ckpt"));
        }
    }
    log.flush();
    trainer.checkpoint().write(options.out_dir / "final.ckpt");
    return reports;
}

}  // namespace moodshift
