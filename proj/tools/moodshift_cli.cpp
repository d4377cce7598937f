// moodshift: command-line front end.
//
//   moodshift <simulate|maketoy|train|bank|convert|evaluate> [--config FILE]
//             [--set key=value ...] [--seed N] [--out-dir DIR]
//             [--strict-determinism] [command flags]

#include <iostream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "json.hpp"
#include "moodshift/commands.hpp"
#include "moodshift/error.hpp"

namespace {

int exit_code(const moodshift::Error& e) {
    const std::string kind = e.kind();
    if (kind == "config" || kind == "domain") return 2;
    if (kind == "io" || kind == "manifest" || kind == "format") return 3;
    return 1;
}

void report(const char* kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-based speech emotion conversion"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool strict = false;
    app.add_option("--config", config_file, "JSON run configuration");
    app.add_option("--set", sets, "Override a config value, e.g. training.n_steps=200 (repeatable)");
    app.add_option("--seed", seed, "Derive every seed stream from this value");
    app.add_option("--out-dir", out_dir, "Run directory (overrides paths.run_dir)");
    app.add_flag("--strict-determinism", strict, "Pin single-threaded numerics and record the mode");

    auto* simulate = app.add_subcommand("simulate", "Forward SDE simulation against the closed-form kernel");
    auto* maketoy = app.add_subcommand("maketoy", "Generate the synthetic toy corpus");
    auto* train = app.add_subcommand("train", "Train the score model");
    moodshift::TrainArgs train_args;
    train->add_option("--resume", train_args.resume, "Checkpoint to resume from");
    auto* bank = app.add_subcommand("bank", "Build the target-emotion embedding bank");
    auto* convert = app.add_subcommand("convert", "Convert utterances to target arousal values");
    moodshift::ConvertArgs convert_args;
    double target = 0.0;
    auto* target_opt = convert->add_option("--target-arousal", target, "Target arousal in [1, 7]; default: sweep");
    convert->add_option("--source", convert_args.source, "Utterance id or wav file; default: every source-split record");
    convert->add_option("--speaker", convert_args.speaker, "Speaker id for a wav source");
    convert->add_option("--out", convert_args.out, "Output directory");
    convert->add_option("--checkpoint", convert_args.checkpoint, "Model checkpoint");
    convert->add_option("--bank", convert_args.bank, "Embedding bank file");
    auto* evaluate = app.add_subcommand("evaluate", "Metrics, class-wise tables and diagnostics plots");
    moodshift::EvaluateArgs eval_args;
    evaluate->add_option("--results", eval_args.results, "Conversion output directory");
    evaluate->add_option("--out", eval_args.out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        report("usage", e.what());
        return 2;
    }

    try {
        std::vector<moodshift::ConfigOverride> overrides;
        for (const auto& s : sets) overrides.push_back(moodshift::parse_override(s));
        if (!out_dir.empty()) overrides.push_back({"paths.run_dir", nlohmann::json(out_dir).dump()});
        if (strict) overrides.push_back({"strict_determinism", "true"});
        moodshift::RunConfig config = moodshift::resolve_config(config_file, overrides);
        if (seed) config.seeds = moodshift::SeedConfig::from_base(*seed);
        if (config.strict_determinism) Eigen::setNbThreads(1);

        std::ostream& log = std::cout;
        if (simulate->parsed()) moodshift::cmd_simulate(config, log);
        if (maketoy->parsed()) moodshift::cmd_maketoy(config, log);
        if (train->parsed()) moodshift::cmd_train(config, train_args, log);
        if (bank->parsed()) moodshift::cmd_bank(config, log);
        if (convert->parsed()) {
            if (target_opt->count() > 0) convert_args.target_arousal = target;
            moodshift::cmd_convert(config, convert_args, log);
        }
        if (evaluate->parsed()) moodshift::cmd_evaluate(config, eval_args, log);
    } catch (const moodshift::Error& e) {
        report(e.kind(), e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        report("internal", e.what());
        return 1;
    }
    return 0;
}
