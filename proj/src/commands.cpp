#include "moodshift/commands.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "json.hpp"
#include "moodshift/error.hpp"
#include "moodshift/inference.hpp"
#include "moodshift/manifest.hpp"
#include "moodshift/metrics.hpp"
#include "moodshift/pitch.hpp"
#include "moodshift/plots.hpp"
#include "moodshift/quality.hpp"
#include "moodshift/random.hpp"
#include "moodshift/sde.hpp"
#include "moodshift/wav.hpp"

namespace moodshift {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << text;
    if (!os) throw IoError("failed writing " + path.string());
}

fs::path run_dir(const RunConfig& c) { return fs::path(c.paths.run_dir); }

fs::path manifest_path(const RunConfig& c) { return c.data_dir() / "manifest.jsonl"; }

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path.string());
}

std::vector<UtteranceRecord> load_split(const RunConfig& c, const std::string& split, std::ostream& log) {
    const fs::path m = manifest_path(c);
    require_file(m, "manifest");
    std::vector<std::string> warnings;
    auto records = filter_split(load_manifest(m, &warnings), parse_split(split));
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    return records;
}

ScoreModel load_model(const RunConfig& c, const fs::path& path) {
    require_file(path, "checkpoint");
    ScoreModel model = Checkpoint::read(path).model();
    if (!(model.config() == c.model_config())) {
        throw ConfigError("checkpoint " + path.string() + " was trained with a different model configuration");
    }
    if (!(model.schedule() == c.schedule)) {
        throw ConfigError("checkpoint " + path.string() + " was trained with a different noise schedule");
    }
    return model;
}

std::uint64_t conversion_seed(const RunConfig& c, const std::string& id, double target) {
    return mix_seed(mix_seed(c.seeds.inference, fnv1a64(id)), std::bit_cast<std::uint64_t>(target));
}

std::string target_tag(double target) {
    std::string s = fmt("%.2f", target);
    for (char& ch : s) {
        if (ch == '.') ch = 'p';
    }
    return s;
}

json metadata_json(const ConversionMetadata& m) {
    return {{"utterance_id", m.utterance_id},   {"target_arousal", m.target_arousal},
            {"requested_bin", m.requested_bin}, {"used_bin", m.used_bin},
            {"fallback", m.fallback},           {"seed", m.seed},
            {"n_steps", m.n_steps},             {"printed_diffusion", m.printed_diffusion},
            {"bank_provenance", m.bank_provenance}};
}

}  // namespace

fs::path prepare_output_dir(const RunConfig& config, const fs::path& dir, const std::string& command) {
    fs::create_directories(dir);
    write_text(dir / "config.json", config_to_json(config) + "\n");
    const json info = {{"command", command},
                       {"config_hash", config_hash(config)},
                       {"strict_determinism", config.strict_determinism}};
    write_text(dir / "run_info.json", info.dump(2) + "\n");
    return dir;
}

void cmd_simulate(const RunConfig& config, std::ostream& log) {
    const auto& s = config.simulate;
    const fs::path out = prepare_output_dir(config, run_dir(config) / "simulate", "simulate");
    const Matrix x0 = Matrix::Constant(1, s.n_paths, s.x0);
    const Matrix y = Matrix::Constant(1, s.n_paths, s.y);

    std::map<int, double> wanted;  // step -> requested time
    for (double t : s.times) wanted[static_cast<int>(std::lround(t * s.n_steps))] = t;

    MomentSeries series;
    json rows = json::array();
    std::string table = "t        emp_mean   kernel_mean  z_mean   emp_var    kernel_var   z_var    ok\n";
    bool all_ok = true;
    const double n = s.n_paths;
    simulate_forward(x0, y, config.schedule, {s.n_steps, true}, config.seeds.data,
                     [&](int step, double t, const Matrix& x) {
                         if (!wanted.count(step)) return;
                         const double mean = x.mean();
                         const double var = (x.array() - mean).square().sum() / (n - 1.0);
                         const double alpha = config.schedule.alpha(t);
                         const double k_mean = alpha * s.x0 + (1.0 - alpha) * s.y;
                         const double k_var = config.schedule.variance(t);
                         const double se_mean = std::sqrt(k_var / n);
                         const double se_var = k_var * std::sqrt(2.0 / (n - 1.0));
                         const double z_mean = se_mean > 0 ? (mean - k_mean) / se_mean : 0.0;
                         const double z_var = se_var > 0 ? (var - k_var) / se_var : 0.0;
                         const bool ok = std::abs(z_mean) <= 3.0 && std::abs(z_var) <= 3.0;
                         all_ok = all_ok && ok;
                         series.t.push_back(t);
                         series.empirical_mean.push_back(mean);
                         series.analytic_mean.push_back(k_mean);
                         series.empirical_var.push_back(var);
                         series.analytic_var.push_back(k_var);
                         rows.push_back({{"t", t},
                                         {"empirical_mean", mean},
                                         {"kernel_mean", k_mean},
                                         {"z_mean", z_mean},
                                         {"empirical_variance", var},
                                         {"kernel_variance", k_var},
                                         {"z_variance", z_var},
                                         {"within_3_se", ok}});
                         char line[160];
                         std::snprintf(line, sizeof line, "%-8.4f %-10.5f %-12.5f %-8.3f %-10.5f %-12.5f %-8.3f %s\n", t,
                                       mean, k_mean, z_mean, var, k_var, z_var, ok ? "yes" : "NO");
                         table += line;
                     });
    const json report = {{"config_hash", config_hash(config)},
                         {"n_paths", s.n_paths},
                         {"n_steps", s.n_steps},
                         {"x0", s.x0},
                         {"y", s.y},
                         {"rows", rows},
                         {"all_within_3_se", all_ok}};
    write_text(out / "report.json", report.dump(2) + "\n");
    write_text(out / "report.txt", table);
    if (!series.t.empty()) write_moment_plot(out / "moments.svg", series);
    log << table << "kernel consistency: " << (all_ok ? "all times within 3 standard errors" : "DEVIATION") << '\n';
}

void cmd_maketoy(const RunConfig& config, std::ostream& log) {
    const fs::path dir = config.data_dir();
    prepare_output_dir(config, run_dir(config) / "maketoy", "maketoy");
    const auto records = make_toy_dataset(config.toy_config(), dir);
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& r : records) ++counts[static_cast<int>(r.split)];
    log << "wrote " << records.size() << " utterances to " << dir.string() << " (train " << counts[0] << ", valid "
        << counts[1] << ", test " << counts[2] << ")\n";
}

void cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& log) {
    const auto records = load_split(config, "train", log);
    const EncoderSet encoders = config.encoder_set();
    std::vector<std::string> warnings;
    auto examples = prepare_examples(manifest_path(config), records, encoders, config.mel, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';

    const fs::path out = prepare_output_dir(config, run_dir(config) / "train", "train");
    const TrainConfig tc = config.train_config();
    std::optional<Trainer> trainer;
    if (!args.resume.empty()) {
        require_file(args.resume, "checkpoint");
        const Checkpoint ckpt = Checkpoint::read(args.resume);
        if (!(ckpt.config == config.model_config())) throw ConfigError("resume checkpoint has a different model configuration");
        trainer.emplace(Trainer::resume(tc, ckpt, std::move(examples)));
        log << "resuming from step " << trainer->current_step() << '\n';
    } else {
        trainer.emplace(tc, ScoreModel::init(config.model_config(), config.schedule, config.seeds.init),
                        std::move(examples));
    }
    log << "training " << trainer->model().parameter_count() << " parameters on " << trainer->data().size()
        << " utterances, lambda_mode " << to_string(tc.lambda_mode) << '\n';
    const int every = std::max(1, tc.n_steps / 20);
    double window = 0.0;
    int in_window = 0;
    TrainRunOptions options;
    options.out_dir = out;
    options.on_step = [&](const LossReport& r) {
        window += r.total;
        ++in_window;
        if (r.step % every == 0 || r.step == tc.n_steps) {
            log << "step " << r.step << "/" << tc.n_steps << "  mean total loss " << fmt("%.4f", window / in_window)
                << '\n';
            window = 0.0;
            in_window = 0;
        }
    };
    run_training(*trainer, options);
    log << "wrote " << (out / "final.ckpt").string() << '\n';
}

void cmd_bank(const RunConfig& config, std::ostream& log) {
    const auto records = load_split(config, config.inference.bank_split, log);
    const EncoderSet encoders = config.encoder_set();
    std::vector<std::string> warnings;
    const auto members = collect_bank_members(manifest_path(config), records, *encoders.emotion, config.mel, &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    const EmbeddingBank bank = EmbeddingBank::build(members, config.inference.bank_p);
    const fs::path out = prepare_output_dir(config, run_dir(config) / "bank", "bank");
    bank.save(out / "bank.json");
    for (int b = 1; b <= 7; ++b) {
        if (bank.has_bin(b)) {
            const auto& e = bank.entries().at(b);
            log << "bin " << b << ": " << e.provenance.size() << " of " << e.bin_size << " references\n";
        } else {
            log << "bin " << b << ": empty\n";
        }
    }
}

void cmd_convert(const RunConfig& config, const ConvertArgs& args, std::ostream& log) {
    std::vector<double> targets;
    if (args.target_arousal) {
        targets.push_back(ArousalLabel(*args.target_arousal).value());  // rejects values outside [1, 7]
    } else {
        for (int t : config.inference.targets) targets.push_back(t);
    }
    const fs::path ckpt_path = args.checkpoint.empty() ? run_dir(config) / "train" / "final.ckpt" : fs::path(args.checkpoint);
    const fs::path bank_path = args.bank.empty() ? run_dir(config) / "bank" / "bank.json" : fs::path(args.bank);
    const ScoreModel model = load_model(config, ckpt_path);
    require_file(bank_path, "embedding bank");
    const EmbeddingBank bank = EmbeddingBank::load(bank_path);
    for (double t : targets) bank.lookup(t, config.inference.allow_bin_fallback);  // fail before writing
    const EncoderSet encoders = config.encoder_set();

    struct Source {
        UtteranceRecord record;
        fs::path audio;
        bool labelled;
    };
    std::vector<Source> sources;
    if (args.source.empty()) {
        for (auto& r : load_split(config, config.inference.source_split, log)) {
            sources.push_back({r, resolve_audio_path(manifest_path(config), r), true});
        }
    } else if (fs::is_regular_file(args.source)) {
        UtteranceRecord r;
        r.utterance_id = fs::path(args.source).stem().string();
        r.audio_path = args.source;
        r.speaker_id = args.speaker;
        sources.push_back({r, fs::path(args.source), false});
    } else {
        const fs::path m = manifest_path(config);
        require_file(m, "manifest");
        bool found = false;
        for (auto& r : load_manifest(m)) {
            if (r.utterance_id == args.source) {
                sources.push_back({r, resolve_audio_path(m, r), true});
                found = true;
                break;
            }
        }
        if (!found) throw IoError("source '" + args.source + "' is neither a file nor an utterance id in " + m.string());
    }
    if (sources.empty()) throw ManifestError("no source utterances to convert");

    const fs::path out = prepare_output_dir(config, args.out.empty() ? run_dir(config) / "convert" : fs::path(args.out),
                                            "convert");
    fs::create_directories(out / "mels");
    fs::create_directories(out / "audio");
    ConversionOptions options;
    options.solver.n_steps = config.inference.n_steps;
    options.solver.printed_diffusion = config.inference.printed_diffusion;
    options.allow_bin_fallback = config.inference.allow_bin_fallback;

    std::string results;
    int done = 0;
    for (const auto& src : sources) {
        const Waveform wave = read_wav(src.audio);
        if (wave.sample_rate != config.mel.sample_rate) {
            throw FormatError(src.audio.string() + " has sample rate " + std::to_string(wave.sample_rate) +
                              ", configured " + std::to_string(config.mel.sample_rate));
        }
        const MelSpectrogram x0 = mel_extract(wave.samples, config.mel);
        const double source_arousal = src.labelled ? src.record.arousal.value()
                                                   : encoders.emotion->predict_arousal(src.record.utterance_id, x0).value();
        for (double target : targets) {
            options.solver.seed = conversion_seed(config, src.record.utterance_id, target);
            const ConversionResult res = convert(x0, src.record, ArousalLabel(target), bank, encoders, model, options);
            const std::string stem = src.record.utterance_id + "_to_" + target_tag(target);
            write_mel_file(out / "mels" / (stem + ".mel"), res.mel_out);
            const Waveform audio =
                mel_invert(res.mel_out, config.mel, config.inference.griffin_lim_iters,
                           mix_seed(config.seeds.vocoder, options.solver.seed));
            write_wav(out / "audio" / (stem + ".wav"), audio);
            const json row = {{"utterance_id", src.record.utterance_id},
                              {"source_arousal", source_arousal},
                              {"target_arousal", target},
                              {"mel", "mels/" + stem + ".mel"},
                              {"audio", "audio/" + stem + ".wav"},
                              {"source_audio", fs::proximate(src.audio, out).generic_string()},
                              {"metadata", metadata_json(res.metadata)}};
            results += row.dump() + "\n";
            if (res.metadata.fallback) {
                log << "note: " << stem << " used bin " << res.metadata.used_bin << " for requested bin "
                    << res.metadata.requested_bin << '\n';
            }
            ++done;
        }
    }
    write_text(out / "results.jsonl", results);
    log << "wrote " << done << " conversions to " << out.string() << '\n';
}

void cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& log) {
    const fs::path results_dir = args.results.empty() ? run_dir(config) / "convert" : fs::path(args.results);
    const fs::path results_file = results_dir / "results.jsonl";
    require_file(results_file, "conversion results");
    const EncoderSet encoders = config.encoder_set();

    struct Item {
        ConversionEvalRow row;
        fs::path mel, audio, source_audio;
    };
    std::vector<Item> items;
    {
        std::ifstream is(results_file);
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const json j = json::parse(line);
                Item it;
                it.row.utterance_id = j.at("utterance_id").get<std::string>();
                it.row.source_arousal = j.at("source_arousal").get<double>();
                it.row.target_arousal = j.at("target_arousal").get<double>();
                it.mel = results_dir / j.at("mel").get<std::string>();
                it.audio = results_dir / j.at("audio").get<std::string>();
                it.source_audio = results_dir / j.at("source_audio").get<std::string>();
                items.push_back(std::move(it));
            } catch (const json::exception& e) {
                throw FormatError(results_file.string() + " line " + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    if (items.empty()) throw FormatError(results_file.string() + " holds no conversions");

    std::map<fs::path, Matrix> mel_cache;
    std::vector<ConversionEvalRow> rows;
    for (auto& it : items) {
        const MelSpectrogram mel = read_mel_file(it.mel);
        it.row.predicted_arousal = encoders.emotion->predict_arousal(it.row.utterance_id, mel).value();
        mel_cache.emplace(it.mel, mel.values());
        rows.push_back(it.row);
    }

    const SerErrors ser = ser_errors(rows);
    const auto by_target = classwise_errors(rows, GroupBy::Target);
    const auto by_source = classwise_errors(rows, GroupBy::Source);
    std::optional<double> rho_source, rho_pooled;
    try {
        rho_source = mean_per_source_spearman(rows);
    } catch (const ContractError&) {
    }
    if (rows.size() >= 2) rho_pooled = pooled_spearman(rows);

    std::unique_ptr<QualityScorer> scorer;
    std::string quality_note;
    if (!config.eval.quality_scores.empty()) {
        try {
            scorer = std::make_unique<RecordedScoresAdapter>(config.eval.quality_scores);
        } catch (const Error& e) {
            quality_note = e.what();
        }
    }
    std::vector<Waveform> audios;
    std::vector<QualityItem> q_items;
    if (scorer) {
        audios.reserve(items.size());
        for (const auto& it : items) {
            audios.push_back(fs::is_regular_file(it.audio) ? read_wav(it.audio) : Waveform{});
            q_items.push_back({it.audio.stem().string(), &audios.back()});
        }
    }
    QualityReport quality = quality_metric(scorer.get(), q_items);
    if (!quality_note.empty()) quality.status = "unavailable: " + quality_note;

    const fs::path out = prepare_output_dir(config, args.out.empty() ? run_dir(config) / "evaluate" : fs::path(args.out),
                                            "evaluate");

    // Per-row table.
    std::string rows_csv = "utterance_id,source_arousal,target_arousal,predicted_arousal,normalized_error\n";
    for (const auto& r : rows) {
        rows_csv += r.utterance_id + "," + fmt("%.6f", r.source_arousal) + "," + fmt("%.6f", r.target_arousal) + "," +
                    fmt("%.6f", r.predicted_arousal) + "," +
                    fmt("%.6f", normalize_arousal(r.predicted_arousal) - normalize_arousal(r.target_arousal)) + "\n";
    }
    write_text(out / "rows.csv", rows_csv);

    auto class_json = [](const std::array<ClassStats, 7>& stats) {
        json a = json::array();
        for (const auto& c : stats) {
            a.push_back({{"bin", c.bin}, {"count", c.count}, {"mse_mean", c.mean}, {"mse_sd", c.sd}, {"empty", c.empty}});
        }
        return a;
    };
    std::string class_csv = "group,bin,count,mse_mean,mse_sd,empty\n";
    for (const auto& [name, stats] : {std::pair{"target", &by_target}, std::pair{"source", &by_source}}) {
        for (const auto& c : *stats) {
            class_csv += std::string(name) + "," + std::to_string(c.bin) + "," + std::to_string(c.count) + "," +
                         fmt("%.6f", c.mean) + "," + fmt("%.6f", c.sd) + "," + (c.empty ? "yes" : "no") + "\n";
        }
    }
    write_text(out / "classwise.csv", class_csv);
    write_classwise_plot(out / "classwise.svg", by_target, by_source);

    // Pitch diagnostics for the source nearest to the mid-low arousal example
    // with its lowest and highest conversions.
    json pitch = nullptr;
    {
        std::string pick;
        double best = 1e9;
        for (const auto& r : rows) {
            if (std::abs(r.source_arousal - 3.2) < best) {
                best = std::abs(r.source_arousal - 3.2);
                pick = r.utterance_id;
            }
        }
        const Item* lo = nullptr;
        const Item* hi = nullptr;
        for (const auto& it : items) {
            if (it.row.utterance_id != pick) continue;
            if (!lo || it.row.target_arousal < lo->row.target_arousal) lo = &it;
            if (!hi || it.row.target_arousal > hi->row.target_arousal) hi = &it;
        }
        if (lo && fs::is_regular_file(lo->source_audio)) {
            const Waveform src = read_wav(lo->source_audio);
            std::vector<LabeledMel> mels{{"source e=" + fmt("%.2f", lo->row.source_arousal), mel_extract(src.samples, config.mel).values()}};
            std::vector<LabeledContour> contours{{"source", pitch_contour(src, config.eval.pitch)}};
            pitch = json{{"utterance_id", pick}, {"source_mean_f0", contours[0].contour.mean_voiced()}};
            std::vector<const Item*> shown{lo};
            if (hi != lo) shown.push_back(hi);
            for (const Item* it : shown) {
                const std::string label = "target " + fmt("%g", it->row.target_arousal);
                mels.push_back({label, mel_cache.at(it->mel)});
                if (fs::is_regular_file(it->audio)) {
                    contours.push_back({label, pitch_contour(read_wav(it->audio), config.eval.pitch)});
                    pitch[it == lo ? "low_target" : "high_target"] = {
                        {"target_arousal", it->row.target_arousal},
                        {"mean_f0", contours.back().contour.mean_voiced()},
                        {"sd_f0", contours.back().contour.sd_voiced()},
                        {"voiced_fraction", contours.back().contour.voiced_fraction()}};
                }
            }
            write_diagnostics_plot(out / "diagnostics.svg", mels, contours);
        }
    }

    const json metrics = {
        {"config_hash", config_hash(config)},
        {"n_conversions", rows.size()},
        {"arousal_normalization", "(a - 1) / 6"},
        {"L_mse", ser.mse},
        {"L_abs_percent", ser.abs_percent},
        {"spearman_mean_per_source", rho_source ? json(*rho_source) : json(nullptr)},
        {"spearman_pooled", rho_pooled ? json(*rho_pooled) : json(nullptr)},
        {"classwise_by_target", class_json(by_target)},
        {"classwise_by_source", class_json(by_source)},
        {"quality", {{"status", quality.status}, {"SIG", quality.sig_text()}, {"OVRL", quality.ovrl_text()}}},
        {"pitch", pitch},
    };
    write_text(out / "metrics.json", metrics.dump(2) + "\n");

    std::string table;
    table += "conversions            " + std::to_string(rows.size()) + "\n";
    table += "L_mse (normalized)     " + fmt("%.4f", ser.mse) + "\n";
    table += "L_abs (normalized)     " + fmt("%.2f", ser.abs_percent) + " %\n";
    table += "Spearman per source    " + (rho_source ? fmt("%.4f", *rho_source) : std::string("n/a")) + "\n";
    table += "Spearman pooled        " + (rho_pooled ? fmt("%.4f", *rho_pooled) : std::string("n/a")) + "\n";
    table += "SIG                    " + quality.sig_text() + "\n";
    table += "OVRL                   " + quality.ovrl_text() + "\n";
    table += "\nbin  by target (n, mse mean +/- sd)     by source (n, mse mean +/- sd)\n";
    for (int b = 0; b < 7; ++b) {
        auto cell = [](const ClassStats& c) {
            char buf[64];
            if (c.empty) {
                std::snprintf(buf, sizeof buf, "%-34s", "(empty)");
            } else {
                std::snprintf(buf, sizeof buf, "n=%-4zu %.4f +/- %-18.4f", c.count, c.mean, c.sd);
            }
            return std::string(buf);
        };
        table += std::to_string(b + 1) + "    " + cell(by_target[b]) + " " + cell(by_source[b]) + "\n";
    }
    write_text(out / "metrics.txt", table);
    log << table;
}

}  // namespace moodshift
