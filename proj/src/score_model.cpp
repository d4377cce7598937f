#include "moodshift/score_model.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "moodshift/binary_io.hpp"
#include "moodshift/error.hpp"

namespace moodshift {

using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'M', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr double kTimeScale = 1000.0;

json config_to_json(const ScoreModelConfig& c) {
    return {{"n_mels", c.n_mels},
            {"base_channels", c.base_channels},
            {"depth", c.depth},
            {"time_embed_dim", c.time_embed_dim},
            {"speaker_dim", c.speaker_dim},
            {"emotion_dim", c.emotion_dim}};
}

ScoreModelConfig config_from_json(const json& j) {
    ScoreModelConfig c;
    c.n_mels = j.at("n_mels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.depth = j.at("depth").get<int>();
    c.time_embed_dim = j.at("time_embed_dim").get<int>();
    c.speaker_dim = j.at("speaker_dim").get<int>();
    c.emotion_dim = j.at("emotion_dim").get<int>();
    return c;
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix m(top.rows() + bottom.rows(), top.cols());
    m.topRows(top.rows()) = top;
    m.bottomRows(bottom.rows()) = bottom;
    return m;
}

}  // namespace

void ScoreModelConfig::validate() const {
    if (n_mels < 1 || base_channels < 1 || depth < 1 || time_embed_dim < 2 || speaker_dim < 1 || emotion_dim < 1) {
        throw ConfigError("score model: depth >= 1, time_embed_dim >= 2 and all other sizes >= 1 are required");
    }
    if (depth > 8) throw ConfigError("score model: depth above 8 is not supported");
}

ScoreModel::ScoreModel(ScoreModelConfig config, NoiseSchedule schedule)
    : config_(config), schedule_(schedule) {
    config_.validate();
    build();
}

void ScoreModel::build() {
    nn::ParamLayout layout;
    const int e = config_.time_embed_dim;
    const int d = config_.depth;
    channels_.clear();
    for (int l = 0; l <= d; ++l) channels_.push_back(config_.base_channels * (l + 1));

    time_fc1_ = nn::Linear(layout, e, e);
    time_fc2_ = nn::Linear(layout, e, e);
    speaker_proj_ = nn::Linear(layout, config_.speaker_dim, e);
    emotion_proj_ = nn::Linear(layout, config_.emotion_dim, e);
    conv_in_ = nn::Conv1d(layout, 2 * config_.n_mels, channels_[0], 3);
    down_.clear();
    up_.clear();
    for (int l = 0; l < d; ++l) {
        const int in = l == 0 ? channels_[0] : channels_[l - 1];
        down_.emplace_back(layout, in, channels_[l], e);
    }
    mid_ = nn::ResBlock(layout, channels_[d - 1], channels_[d], e);
    for (int l = 0; l < d; ++l) up_.emplace_back(layout, channels_[l + 1] + channels_[l], channels_[l], e);
    conv_out_ = nn::Conv1d(layout, channels_[0], config_.n_mels, 1);
    params_.assign(layout.total(), 0.0);
}

ScoreModel ScoreModel::init(const ScoreModelConfig& config, const NoiseSchedule& schedule, std::uint64_t seed) {
    ScoreModel m(config, schedule);
    Rng rng(seed);
    std::span<double> p = m.params_;
    m.time_fc1_.init(p, rng);
    m.time_fc2_.init(p, rng);
    m.speaker_proj_.init(p, rng);
    m.emotion_proj_.init(p, rng);
    m.conv_in_.init(p, rng);
    for (const auto& b : m.down_) b.init(p, rng);
    m.mid_.init(p, rng);
    for (const auto& b : m.up_) b.init(p, rng);
    m.conv_out_.init(p, rng);
    return m;
}

void ScoreModel::check_inputs(const Matrix& x_t, const ConditioningBundle& cond) const {
    if (x_t.rows() != config_.n_mels) {
        throw ContractError("score model expects " + std::to_string(config_.n_mels) + " mel bins, got " +
                            std::to_string(x_t.rows()));
    }
    if (x_t.cols() < 1) throw ContractError("score model input has no frames");
    require_same_shape(x_t, cond.y, "score model (x_t vs y)");
    if (cond.speaker.size() != config_.speaker_dim) throw ContractError("speaker vector has the wrong dimension");
    if (cond.emotion.size() != config_.emotion_dim) throw ContractError("emotion vector has the wrong dimension");
    if (!x_t.allFinite() || !cond.y.allFinite() || !cond.speaker.allFinite() || !cond.emotion.allFinite()) {
        throw ContractError("score model received non-finite input");
    }
    if (!(cond.t > 0.0 && cond.t <= 1.0)) {
        if (cond.t == 0.0) throw DegenerateVarianceError("score model cannot be evaluated at t = 0");
        throw ContractError("diffusion time outside (0, 1]");
    }
}

Matrix ScoreModel::evaluate(const Matrix& x_t, const ConditioningBundle& cond) const {
    Tape tape;
    return forward(x_t, cond, tape);
}

Matrix ScoreModel::forward(const Matrix& x_t, const ConditioningBundle& cond, Tape& tape) const {
    check_inputs(x_t, cond);
    const std::span<const double> p = params_;
    const int d = config_.depth;
    const Eigen::Index block = Eigen::Index{1} << d;

    tape.t = cond.t;
    tape.frames = x_t.cols();
    tape.padded = (tape.frames + block - 1) / block * block;

    const Matrix z = x_t - cond.y;
    tape.input = nn::reflect_pad(stack_rows(z, cond.y), tape.padded);

    tape.speaker = cond.speaker;
    tape.emotion = cond.emotion;
    tape.time_emb = nn::sinusoidal_embedding(kTimeScale * cond.t, config_.time_embed_dim);
    tape.time_h1 = time_fc1_.forward(tape.time_emb, p);
    tape.cond_raw = time_fc2_.forward(nn::silu(tape.time_h1), p) + speaker_proj_.forward(cond.speaker, p) +
                    emotion_proj_.forward(cond.emotion, p);
    tape.cond = nn::silu(tape.cond_raw);

    Matrix h = conv_in_.forward(tape.input, p, tape.col_in);
    tape.down.resize(static_cast<std::size_t>(d));
    tape.up.resize(static_cast<std::size_t>(d));
    std::vector<Matrix> skips(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) {
        h = down_[l].forward(h, tape.cond, p, tape.down[l]);
        skips[l] = h;
        h = nn::avg_pool2(h);
    }
    h = mid_.forward(h, tape.cond, p, tape.mid);
    for (int l = d - 1; l >= 0; --l) {
        h = up_[l].forward(stack_rows(nn::upsample2(h), skips[l]), tape.cond, p, tape.up[l]);
    }
    tape.out_pre = std::move(h);
    const Matrix out = conv_out_.forward(nn::silu(tape.out_pre), p, tape.col_out);
    tape.denoised = out.leftCols(tape.frames);

    const double alpha = schedule_.alpha(cond.t);
    const double var = schedule_.variance(cond.t);
    return (alpha * tape.denoised - z) / var;
}

void ScoreModel::backward(const Tape& tape, const Matrix& d_score, std::span<double> grads) const {
    if (grads.size() != params_.size()) throw ContractError("gradient buffer has the wrong size");
    if (d_score.rows() != config_.n_mels || d_score.cols() != tape.frames) {
        throw ContractError("score gradient does not match the recorded forward pass");
    }
    const std::span<const double> p = params_;
    const int d = config_.depth;
    const double alpha = schedule_.alpha(tape.t);
    const double var = schedule_.variance(tape.t);

    Matrix d_out = Matrix::Zero(config_.n_mels, tape.padded);
    d_out.leftCols(tape.frames) = (alpha / var) * d_score;
    Matrix dh = conv_out_.backward(d_out, tape.col_out, p, grads).cwiseProduct(nn::silu_grad(tape.out_pre));

    Vector d_cond = Vector::Zero(config_.time_embed_dim);
    std::vector<Matrix> d_skips(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) {
        const Matrix d_cat = up_[l].backward(dh, tape.cond, tape.up[l], p, grads, d_cond);
        const Eigen::Index upper = d_cat.rows() - channels_[l];
        d_skips[l] = d_cat.bottomRows(channels_[l]);
        dh = nn::upsample2_backward(d_cat.topRows(upper));
    }
    dh = mid_.backward(dh, tape.cond, tape.mid, p, grads, d_cond);
    for (int l = d - 1; l >= 0; --l) {
        dh = nn::avg_pool2_backward(dh) + d_skips[l];
        dh = down_[l].backward(dh, tape.cond, tape.down[l], p, grads, d_cond);
    }
    conv_in_.backward(dh, tape.col_in, p, grads);

    const Vector d_cond_raw = d_cond.cwiseProduct(nn::silu_grad(tape.cond_raw));
    // The conditioning inputs are not trainable; only parameter gradients matter.
    const Vector d_time_act = time_fc2_.backward(d_cond_raw, nn::silu(tape.time_h1), p, grads);
    time_fc1_.backward(d_time_act.cwiseProduct(nn::silu_grad(tape.time_h1)), tape.time_emb, p, grads);
    speaker_proj_.backward(d_cond_raw, tape.speaker, p, grads);
    emotion_proj_.backward(d_cond_raw, tape.emotion, p, grads);
}

std::vector<std::uint8_t> ScoreModel::serialize() const { return Checkpoint::of(*this).to_bytes(); }

ScoreModel ScoreModel::deserialize(std::span<const std::uint8_t> bytes) { return Checkpoint::from_bytes(bytes).model(); }

Checkpoint Checkpoint::of(const ScoreModel& model) {
    Checkpoint c{model.config(), model.schedule(), "{}", {}};
    c.sections["params"].assign(model.parameters().begin(), model.parameters().end());
    return c;
}

ScoreModel Checkpoint::model() const {
    ScoreModel m(config, schedule);
    const auto it = sections.find("params");
    if (it == sections.end()) throw FormatError("checkpoint has no 'params' section");
    if (it->second.size() != m.parameter_count()) {
        throw FormatError("checkpoint holds " + std::to_string(it->second.size()) + " parameters but its config needs " +
                          std::to_string(m.parameter_count()));
    }
    std::copy(it->second.begin(), it->second.end(), m.parameters().begin());
    return m;
}

std::vector<std::uint8_t> Checkpoint::to_bytes() const {
    std::ostringstream os(std::ios::binary);
    BinaryWriter w(os);
    const json header = {{"model", config_to_json(config)},
                         {"schedule", {{"b0", schedule.b0()}, {"b1", schedule.b1()}, {"t_min", schedule.t_min()}, {"t_max", schedule.t_max()}}},
                         {"emotion_dim", config.emotion_dim},
                         {"metadata", json::parse(metadata_json)}};
    w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.u32(kVersion);
    w.string(header.dump());
    w.u32(static_cast<std::uint32_t>(sections.size()));
    for (const auto& [name, data] : sections) {
        w.string(name);
        w.u64(data.size());
        w.bytes(data.data(), data.size() * sizeof(double));
    }
    const std::string s = os.str();
    return {s.begin(), s.end()};
}

Checkpoint Checkpoint::from_bytes(std::span<const std::uint8_t> bytes) {
    std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
    BinaryReader r(is, "checkpoint");
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw FormatError("not a score-model checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    try {
        const json header = json::parse(r.string());
        const json& s = header.at("schedule");
        Checkpoint c{config_from_json(header.at("model")),
                     NoiseSchedule(s.at("b0").get<double>(), s.at("b1").get<double>(), s.at("t_min").get<double>(),
                                   s.at("t_max").get<double>()),
                     header.value("metadata", json::object()).dump(),
                     {}};
        if (header.at("emotion_dim").get<int>() != c.config.emotion_dim) {
            throw FormatError("checkpoint emotion_dim disagrees with its model config");
        }
        const std::uint32_t n_sections = r.u32();
        for (std::uint32_t i = 0; i < n_sections; ++i) {
            std::string name = r.string(1024);
            const std::uint64_t count = r.u64();
            if (count > (std::uint64_t{1} << 32)) throw FormatError("checkpoint section '" + name + "' is implausibly large");
            std::vector<double> data(count);
            r.bytes(data.data(), count * sizeof(double));
            c.sections.emplace(std::move(name), std::move(data));
        }
        return c;
    } catch (const json::exception& e) {
        throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
    } catch (const DomainError& e) {
        throw FormatError(std::string("checkpoint schedule is invalid: ") + e.what());
    }
}

void Checkpoint::write(const std::filesystem::path& path) const {
    const auto bytes = to_bytes();
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write checkpoint " + tmp.string());
        os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

}  // namespace moodshift
