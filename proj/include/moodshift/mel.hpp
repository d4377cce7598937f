#pragma once

#include <filesystem>

#include <Eigen/Dense>

namespace moodshift {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Log-mel feature matrix, mel bins along rows and frames along columns.
/// This is also the state space of the diffusion process.
class MelSpectrogram {
public:
    MelSpectrogram() = default;

    /// Throws ContractError when the matrix is empty or holds non-finite values.
    explicit MelSpectrogram(Matrix values, double frame_rate = 0.0);

    const Matrix& values() const { return values_; }
    Eigen::Index n_mels() const { return values_.rows(); }
    Eigen::Index frames() const { return values_.cols(); }
    double frame_rate() const { return frame_rate_; }

private:
    Matrix values_;
    double frame_rate_ = 0.0;
};

bool all_finite(const Matrix& m);

// Mel file: char[8] "MSMEL001", u32 n_mels, u32 frames, f64 frame rate, then
// the values as f64 in column-major order.
void write_mel_file(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel_file(const std::filesystem::path& path);  // throws FormatError

// Throws ContractError naming `what` when the shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace moodshift
