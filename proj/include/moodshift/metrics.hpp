#pragma once

// Conversion accuracy measures. Arousal values are mapped to [0, 1] with
// (a - 1) / 6 before any error is taken, and the absolute error is reported
// in percent of that unit range.

#include <array>
#include <span>
#include <string>
#include <vector>

namespace moodshift {

struct ConversionEvalRow {
    std::string utterance_id;
    double source_arousal = 4.0;
    double target_arousal = 4.0;
    double predicted_arousal = 4.0;
};

/// (a - 1) / 6. Throws DomainError outside [1, 7].
double normalize_arousal(double a);
/// Inverse of normalize_arousal.
double denormalize_arousal(double a_norm);

struct SerErrors {
    double mse = 0.0;          // mean squared normalized error
    double abs_percent = 0.0;  // 100 * mean absolute normalized error
    std::size_t count = 0;
};

/// Throws ContractError on an empty row set.
SerErrors ser_errors(std::span<const ConversionEvalRow> rows);

enum class GroupBy { Target, Source };

struct ClassStats {
    int bin = 0;
    std::size_t count = 0;
    double mean = 0.0;  // mean squared normalized error
    double sd = 0.0;    // population standard deviation of the same
    bool empty = true;
};

/// Bins 1..7 by rounding the grouping variable. Empty bins are flagged with
/// zero statistics. Throws ContractError on an empty row set.
std::array<ClassStats, 7> classwise_errors(std::span<const ConversionEvalRow> rows, GroupBy group_by);

/// Spearman rank correlation with average ranks for ties. Returns 0 when
/// either side is constant. Throws ContractError for mismatched or < 2 values.
double spearman(std::span<const double> a, std::span<const double> b);

/// Mean over sources of the per-source Spearman correlation between target
/// and predicted arousal; sources with fewer than two rows are skipped.
double mean_per_source_spearman(std::span<const ConversionEvalRow> rows);

/// Spearman over all rows pooled.
double pooled_spearman(std::span<const ConversionEvalRow> rows);

}  // namespace moodshift
