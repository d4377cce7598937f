#include "moodshift/config.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "moodshift/error.hpp"
#include "moodshift/random.hpp"

namespace moodshift {

using nlohmann::json;

SeedConfig SeedConfig::from_base(std::uint64_t base) {
    return {mix_seed(base, 1), mix_seed(base, 2), mix_seed(base, 3), mix_seed(base, 4), mix_seed(base, 5)};
}

ScoreModelConfig RunConfig::model_config() const {
    ScoreModelConfig c;
    c.n_mels = mel.n_mels;
    c.base_channels = model.base_channels;
    c.depth = model.depth;
    c.time_embed_dim = model.time_embed_dim;
    c.speaker_dim = encoders.speaker_dim;
    c.emotion_dim = encoders.emotion_dim;
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig c = training;
    c.schedule = schedule;
    c.rng_seed = seeds.training;
    return c;
}

ToyDatasetConfig RunConfig::toy_config() const {
    ToyDatasetConfig c = toy;
    c.mel = mel;
    c.proxy = encoders.proxy;
    c.seed = seeds.data;
    return c;
}

EncoderSet RunConfig::encoder_set() const {
    return make_mock_encoders(encoders.speaker_dim, encoders.emotion_dim, encoders.phoneme_window, encoders.proxy,
                              encoders.speaker_seed);
}

std::filesystem::path RunConfig::data_dir() const {
    return paths.data_dir.empty() ? std::filesystem::path(paths.run_dir) / "data" : std::filesystem::path(paths.data_dir);
}

void RunConfig::validate() const {
    mel.validate();
    model_config().validate();
    train_config().validate();
    if (toy.n_utts < 1) throw ConfigError("toy.n_utts must be >= 1");
    if (toy.n_speakers < 1) throw ConfigError("toy.n_speakers must be >= 1");
    if (toy.min_frames < 1 || toy.max_frames < toy.min_frames) throw ConfigError("toy frame range is empty");
    if (encoders.phoneme_window < 1) throw ConfigError("encoders.phoneme_window must be >= 1");
    if (!(encoders.proxy.centroid_high > encoders.proxy.centroid_low)) {
        throw ConfigError("encoders.proxy centroid_high must exceed centroid_low");
    }
    if (inference.n_steps < 1) throw ConfigError("inference.n_steps must be >= 1");
    if (!(inference.bank_p > 0.0 && inference.bank_p <= 1.0)) throw ConfigError("inference.bank_p must be in (0, 1]");
    if (inference.targets.empty()) throw ConfigError("inference.targets must not be empty");
    for (int t : inference.targets) {
        if (t < 1 || t > 7) throw ConfigError("inference.targets entries must be in 1..7");
    }
    parse_split(inference.bank_split);
    parse_split(inference.source_split);
    if (inference.griffin_lim_iters < 0) throw ConfigError("inference.griffin_lim_iters must be >= 0");
    if (simulate.n_paths < 2 || simulate.n_steps < 1) throw ConfigError("simulate needs >= 2 paths and >= 1 step");
    for (double t : simulate.times) {
        if (!(t > 0.0 && t <= 1.0)) throw ConfigError("simulate.times entries must be in (0, 1]");
    }
    if (paths.run_dir.empty()) throw ConfigError("paths.run_dir must not be empty");
}

namespace {

json to_doc(const RunConfig& c) {
    return {
        {"seeds",
         {{"data", c.seeds.data},
          {"init", c.seeds.init},
          {"training", c.seeds.training},
          {"inference", c.seeds.inference},
          {"vocoder", c.seeds.vocoder}}},
        {"schedule", {{"b0", c.schedule.b0()}, {"b1", c.schedule.b1()}, {"t_min", c.schedule.t_min()}, {"t_max", c.schedule.t_max()}}},
        {"mel",
         {{"sample_rate", c.mel.sample_rate},
          {"n_fft", c.mel.n_fft},
          {"hop", c.mel.hop},
          {"n_mels", c.mel.n_mels},
          {"fmin", c.mel.fmin},
          {"fmax", c.mel.fmax},
          {"log_floor", c.mel.log_floor}}},
        {"toy",
         {{"n_utts", c.toy.n_utts},
          {"n_speakers", c.toy.n_speakers},
          {"min_frames", c.toy.min_frames},
          {"max_frames", c.toy.max_frames},
          {"segment_frames", c.toy.segment_frames},
          {"content_std", c.toy.content_std},
          {"speaker_std", c.toy.speaker_std},
          {"label_mean", c.toy.label_mean},
          {"label_sd", c.toy.label_sd},
          {"train_fraction", c.toy.train_fraction},
          {"valid_fraction", c.toy.valid_fraction}}},
        {"encoders",
         {{"speaker_dim", c.encoders.speaker_dim},
          {"emotion_dim", c.encoders.emotion_dim},
          {"phoneme_window", c.encoders.phoneme_window},
          {"speaker_seed", c.encoders.speaker_seed},
          {"proxy_centroid_low", c.encoders.proxy.centroid_low},
          {"proxy_centroid_high", c.encoders.proxy.centroid_high}}},
        {"model",
         {{"base_channels", c.model.base_channels}, {"depth", c.model.depth}, {"time_embed_dim", c.model.time_embed_dim}}},
        {"training",
         {{"batch_size", c.training.batch_size},
          {"n_steps", c.training.n_steps},
          {"learning_rate", c.training.optimizer.learning_rate},
          {"adam_beta1", c.training.optimizer.beta1},
          {"adam_beta2", c.training.optimizer.beta2},
          {"adam_epsilon", c.training.optimizer.epsilon},
          {"lambda_mode", std::string(to_string(c.training.lambda_mode))},
          {"score_weighting", std::string(to_string(c.training.score_weighting))},
          {"checkpoint_every", c.training.checkpoint_every},
          {"alpha_floor", c.training.alpha_floor}}},
        {"inference",
         {{"n_steps", c.inference.n_steps},
          {"bank_p", c.inference.bank_p},
          {"printed_diffusion", c.inference.printed_diffusion},
          {"allow_bin_fallback", c.inference.allow_bin_fallback},
          {"targets", c.inference.targets},
          {"bank_split", c.inference.bank_split},
          {"source_split", c.inference.source_split},
          {"griffin_lim_iters", c.inference.griffin_lim_iters}}},
        {"eval",
         {{"pitch",
           {{"window_seconds", c.eval.pitch.window_seconds},
            {"hop_seconds", c.eval.pitch.hop_seconds},
            {"voicing_threshold", c.eval.pitch.voicing_threshold},
            {"f0_min", c.eval.pitch.f0_min},
            {"f0_max", c.eval.pitch.f0_max}}},
          {"quality_scores", c.eval.quality_scores}}},
        {"simulate",
         {{"x0", c.simulate.x0},
          {"y", c.simulate.y},
          {"n_paths", c.simulate.n_paths},
          {"n_steps", c.simulate.n_steps},
          {"times", c.simulate.times}}},
        {"paths", {{"run_dir", c.paths.run_dir}, {"data_dir", c.paths.data_dir}}},
        {"strict_determinism", c.strict_determinism},
    };
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    out = j.at(key).get<T>();
}

RunConfig from_doc(const json& d) {
    RunConfig c;
    const json& s = d.at("seeds");
    read(s, "data", c.seeds.data);
    read(s, "init", c.seeds.init);
    read(s, "training", c.seeds.training);
    read(s, "inference", c.seeds.inference);
    read(s, "vocoder", c.seeds.vocoder);

    const json& sc = d.at("schedule");
    c.schedule = NoiseSchedule(sc.at("b0").get<double>(), sc.at("b1").get<double>(), sc.at("t_min").get<double>(),
                               sc.at("t_max").get<double>());

    const json& m = d.at("mel");
    read(m, "sample_rate", c.mel.sample_rate);
    read(m, "n_fft", c.mel.n_fft);
    read(m, "hop", c.mel.hop);
    read(m, "n_mels", c.mel.n_mels);
    read(m, "fmin", c.mel.fmin);
    read(m, "fmax", c.mel.fmax);
    read(m, "log_floor", c.mel.log_floor);

    const json& t = d.at("toy");
    read(t, "n_utts", c.toy.n_utts);
    read(t, "n_speakers", c.toy.n_speakers);
    read(t, "min_frames", c.toy.min_frames);
    read(t, "max_frames", c.toy.max_frames);
    read(t, "segment_frames", c.toy.segment_frames);
    read(t, "content_std", c.toy.content_std);
    read(t, "speaker_std", c.toy.speaker_std);
    read(t, "label_mean", c.toy.label_mean);
    read(t, "label_sd", c.toy.label_sd);
    read(t, "train_fraction", c.toy.train_fraction);
    read(t, "valid_fraction", c.toy.valid_fraction);

    const json& e = d.at("encoders");
    read(e, "speaker_dim", c.encoders.speaker_dim);
    read(e, "emotion_dim", c.encoders.emotion_dim);
    read(e, "phoneme_window", c.encoders.phoneme_window);
    read(e, "speaker_seed", c.encoders.speaker_seed);
    read(e, "proxy_centroid_low", c.encoders.proxy.centroid_low);
    read(e, "proxy_centroid_high", c.encoders.proxy.centroid_high);

    const json& mo = d.at("model");
    read(mo, "base_channels", c.model.base_channels);
    read(mo, "depth", c.model.depth);
    read(mo, "time_embed_dim", c.model.time_embed_dim);

    const json& tr = d.at("training");
    read(tr, "batch_size", c.training.batch_size);
    read(tr, "n_steps", c.training.n_steps);
    read(tr, "learning_rate", c.training.optimizer.learning_rate);
    read(tr, "adam_beta1", c.training.optimizer.beta1);
    read(tr, "adam_beta2", c.training.optimizer.beta2);
    read(tr, "adam_epsilon", c.training.optimizer.epsilon);
    c.training.lambda_mode = parse_lambda_mode(tr.at("lambda_mode").get<std::string>());
    c.training.score_weighting = parse_score_weighting(tr.at("score_weighting").get<std::string>());
    read(tr, "checkpoint_every", c.training.checkpoint_every);
    read(tr, "alpha_floor", c.training.alpha_floor);

    const json& in = d.at("inference");
    read(in, "n_steps", c.inference.n_steps);
    read(in, "bank_p", c.inference.bank_p);
    read(in, "printed_diffusion", c.inference.printed_diffusion);
    read(in, "allow_bin_fallback", c.inference.allow_bin_fallback);
    read(in, "targets", c.inference.targets);
    read(in, "bank_split", c.inference.bank_split);
    read(in, "source_split", c.inference.source_split);
    read(in, "griffin_lim_iters", c.inference.griffin_lim_iters);

    const json& ev = d.at("eval");
    const json& p = ev.at("pitch");
    read(p, "window_seconds", c.eval.pitch.window_seconds);
    read(p, "hop_seconds", c.eval.pitch.hop_seconds);
    read(p, "voicing_threshold", c.eval.pitch.voicing_threshold);
    read(p, "f0_min", c.eval.pitch.f0_min);
    read(p, "f0_max", c.eval.pitch.f0_max);
    read(ev, "quality_scores", c.eval.quality_scores);

    const json& si = d.at("simulate");
    read(si, "x0", c.simulate.x0);
    read(si, "y", c.simulate.y);
    read(si, "n_paths", c.simulate.n_paths);
    read(si, "n_steps", c.simulate.n_steps);
    read(si, "times", c.simulate.times);

    const json& pa = d.at("paths");
    read(pa, "run_dir", c.paths.run_dir);
    read(pa, "data_dir", c.paths.data_dir);
    read(d, "strict_determinism", c.strict_determinism);
    return c;
}

bool compatible(const json& base, const json& value) {
    if (base.is_number_integer()) return value.is_number_integer();
    if (base.is_number()) return value.is_number();
    if (base.is_array()) {
        if (!value.is_array()) return false;
        if (base.empty()) return true;
        for (const auto& v : value) {
            if (!compatible(base.front(), v)) return false;
        }
        return true;
    }
    return base.type() == value.type();
}

std::string describe_type(const json& v) {
    if (v.is_number_integer()) return "integer";
    if (v.is_array() && !v.empty()) return "array of " + describe_type(v.front());
    return v.type_name();
}

// Overlays `patch` onto `base`, refusing keys and types the base lacks.
void merge_strict(json& base, const json& patch, const std::string& where) {
    if (!patch.is_object()) throw ConfigError("config section '" + where + "' must be an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string path = where.empty() ? key : where + "." + key;
        if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
        json& slot = base[key];
        if (slot.is_object()) {
            merge_strict(slot, value, path);
        } else if (!compatible(slot, value)) {
            throw ConfigError("config key '" + path + "' expects " + describe_type(slot) + ", got " + value.dump());
        } else {
            slot = value;
        }
    }
}

json override_value(const std::string& raw) {
    try {
        return json::parse(raw);
    } catch (const json::parse_error&) {
        return json(raw);
    }
}

RunConfig finish(const json& doc) {
    try {
        RunConfig c = from_doc(doc);
        c.validate();
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
}

}  // namespace

ConfigOverride parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not of the form key=value");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

std::string config_to_json(const RunConfig& config) { return to_doc(config).dump(2); }

RunConfig config_from_json(const std::string& text) {
    json doc = to_doc(RunConfig{});
    try {
        merge_strict(doc, json::parse(text), "");
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return finish(doc);
}

RunConfig resolve_config(const std::filesystem::path& file, const std::vector<ConfigOverride>& overrides) {
    json doc = to_doc(RunConfig{});
    if (!file.empty()) {
        std::ifstream is(file);
        if (!is) throw IoError("cannot read config file " + file.string());
        try {
            merge_strict(doc, json::parse(is), "");
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
        }
    }
    for (const auto& o : overrides) {
        json patch = override_value(o.value);
        std::string key = o.key;
        for (auto dot = key.rfind('.'); dot != std::string::npos; dot = key.rfind('.')) {
            patch = json{{key.substr(dot + 1), patch}};
            key.erase(dot);
        }
        merge_strict(doc, json{{key, patch}}, "");
    }
    return finish(doc);
}

std::string config_hash(const RunConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_doc(config).dump())));
    return buf;
}

}  // namespace moodshift
