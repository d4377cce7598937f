#pragma once

// Subcommands of the command-line tool. Each one writes below
// config.paths.run_dir, records the resolved configuration next to its
// outputs and throws a moodshift::Error on failure.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "moodshift/config.hpp"

namespace moodshift {

/// Output directory of a command with `config.json` and `run_info.json`
/// already written into it.
std::filesystem::path prepare_output_dir(const RunConfig& config, const std::filesystem::path& dir,
                                         const std::string& command);

/// Forward-SDE Monte-Carlo against the closed-form kernel moments.
/// Writes simulate/report.json, report.txt and moments.svg.
void cmd_simulate(const RunConfig& config, std::ostream& log);

/// Synthetic corpus into config.data_dir().
void cmd_maketoy(const RunConfig& config, std::ostream& log);

struct TrainArgs {
    std::string resume;  // checkpoint to continue from
};

/// Trains on the train split; writes train/final.ckpt and train/loss_log.csv.
void cmd_train(const RunConfig& config, const TrainArgs& args, std::ostream& log);

/// Builds the embedding bank from inference.bank_split; writes bank/bank.json.
void cmd_bank(const RunConfig& config, std::ostream& log);

struct ConvertArgs {
    std::string source;                   // utterance id or wav path; empty: every source-split record
    std::optional<double> target_arousal;  // empty: every value in inference.targets
    std::string speaker = "unknown";      // speaker id for wav sources
    std::string out;                      // default <run_dir>/convert
    std::string checkpoint;               // default <run_dir>/train/final.ckpt
    std::string bank;                     // default <run_dir>/bank/bank.json
};

/// Writes mels/, audio/ and results.jsonl into the output directory. The
/// target is validated before anything is created.
void cmd_convert(const RunConfig& config, const ConvertArgs& args, std::ostream& log);

struct EvaluateArgs {
    std::string results;  // default <run_dir>/convert
    std::string out;      // default <run_dir>/evaluate
};

/// Metrics tables, class-wise breakdowns and diagnostics plots.
void cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& log);

}  // namespace moodshift
