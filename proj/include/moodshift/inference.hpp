#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moodshift/encoders.hpp"
#include "moodshift/mel_features.hpp"
#include "moodshift/score_model.hpp"

namespace moodshift {

/// One reference utterance offered to the bank.
struct BankMember {
    std::string utterance_id;
    double arousal = 4.0;
    Vector embedding;
};

struct BankEntry {
    int bin = 0;
    Vector embedding;                     // mean over `provenance`
    std::vector<std::string> provenance;  // selected utterance ids, in rank order
    std::size_t bin_size = 0;             // members whose label rounds to `bin`
};

struct BankLookup {
    const BankEntry* entry = nullptr;
    int requested_bin = 0;
    bool fallback = false;
};

/// Per-target-arousal averaged emotion embeddings. Members of bin b are the
/// references whose label rounds to b; they are ranked by |label - b| (ties by
/// utterance id) and the first ceil(p * |bin|) are averaged.
class EmbeddingBank {
public:
    EmbeddingBank() = default;

    /// Throws ContractError for p outside (0, 1], no members, or members of
    /// unequal dimension. Empty bins are simply absent.
    static EmbeddingBank build(std::span<const BankMember> members, double p);

    double p() const { return p_; }
    Eigen::Index dim() const { return dim_; }
    const std::map<int, BankEntry>& entries() const { return entries_; }
    bool has_bin(int bin) const { return entries_.count(bin) != 0; }

    /// Entry for round(target). An empty bin raises MissingBinError unless
    /// `allow_fallback`, in which case the nearest populated bin is used
    /// (the lower one when two are equally near).
    BankLookup lookup(double target_arousal, bool allow_fallback) const;

    void save(const std::filesystem::path& path) const;
    static EmbeddingBank load(const std::filesystem::path& path);  // throws FormatError

    bool operator==(const EmbeddingBank&) const;

private:
    double p_ = 0.2;
    Eigen::Index dim_ = 0;
    std::map<int, BankEntry> entries_;
};

/// Number of members selected from a bin of the given size.
std::size_t bank_selection_size(std::size_t bin_size, double p);

/// Runs the emotion encoder over every readable record.
std::vector<BankMember> collect_bank_members(const std::filesystem::path& manifest_path,
                                             const std::vector<UtteranceRecord>& records,
                                             const EmotionEncoder& encoder, const MelConfig& mel_config,
                                             std::vector<std::string>* warnings = nullptr);

struct SolverConfig {
    int n_steps = 50;
    std::uint64_t seed = 0;
    // Use beta_t instead of sqrt(beta_t) as the diffusion coefficient, the
    // form in which the reverse equation is sometimes printed.
    bool printed_diffusion = false;
};

using ScoreFn = std::function<Matrix(const Matrix& x, double t)>;

/// Euler-Maruyama integration of the reverse SDE on a uniform grid from t = 1
/// down to schedule.t_min(), starting from N(Y, sigma(1)^2). Returns the state
/// at t_min. Throws DivergenceError naming the step if the state becomes
/// non-finite, ContractError if n_steps < 1.
Matrix reverse_solve(const Matrix& y, const ScoreFn& score, const NoiseSchedule& schedule,
                     const SolverConfig& config);

MelSpectrogram reverse_solve(const MelSpectrogram& y, const Vector& speaker, const Vector& emotion,
                             const ScoreModel& model, const SolverConfig& config);

struct ConversionOptions {
    SolverConfig solver{};
    bool allow_bin_fallback = false;
};

struct ConversionMetadata {
    std::string utterance_id;
    double target_arousal = 0.0;
    int requested_bin = 0;
    int used_bin = 0;
    bool fallback = false;
    std::uint64_t seed = 0;
    int n_steps = 0;
    bool printed_diffusion = false;
    std::vector<std::string> bank_provenance;
};

struct ConversionResult {
    MelSpectrogram mel_out;
    MelSpectrogram y;
    Vector used_embedding;
    ConversionMetadata metadata;
};

ConversionResult convert(const MelSpectrogram& x0, const UtteranceRecord& source, const ArousalLabel& target,
                         const EmbeddingBank& bank, const EncoderSet& encoders, const ScoreModel& model,
                         const ConversionOptions& options);

}  // namespace moodshift
