#pragma once

// Minimal 1-D convolutional building blocks with explicit backward passes.
// Layers do not own their weights: every layer holds offsets into one flat
// parameter buffer, so optimizers, checkpoints and finite-difference checks
// all work on a single std::vector<double>. Activations are channels x time.

#include <cstddef>
#include <optional>
#include <span>

#include "moodshift/mel.hpp"
#include "moodshift/random.hpp"

namespace moodshift::nn {

struct ParamSlice {
    std::size_t offset = 0;
    std::size_t size = 0;
};

class ParamLayout {
public:
    ParamSlice allocate(std::size_t n) {
        ParamSlice s{total_, n};
        total_ += n;
        return s;
    }
    std::size_t total() const { return total_; }

private:
    std::size_t total_ = 0;
};

using ConstParams = std::span<const double>;
using Grads = std::span<double>;

Matrix silu(const Matrix& x);
/// Elementwise d silu(x) / dx.
Matrix silu_grad(const Matrix& x);
Vector silu(const Vector& x);
Vector silu_grad(const Vector& x);

struct Linear {
    int in = 0, out = 0;
    ParamSlice weight, bias;

    Linear() = default;
    Linear(ParamLayout& layout, int in_features, int out_features);
    void init(std::span<double> params, Rng& rng) const;
    Vector forward(const Vector& x, ConstParams params) const;
    /// Accumulates parameter gradients; returns dL/dx.
    Vector backward(const Vector& dy, const Vector& x, ConstParams params, Grads grads) const;
};

/// "Same" zero-padded convolution along time with an odd kernel.
struct Conv1d {
    int in = 0, out = 0, kernel = 1;
    ParamSlice weight, bias;

    Conv1d() = default;
    Conv1d(ParamLayout& layout, int in_channels, int out_channels, int kernel_size);
    void init(std::span<double> params, Rng& rng, double gain = 1.0) const;
    /// `col` receives the unfolded input needed by backward.
    Matrix forward(const Matrix& x, ConstParams params, Matrix& col) const;
    Matrix backward(const Matrix& dy, const Matrix& col, ConstParams params, Grads grads) const;
};

/// silu -> conv3 -> (+ projected conditioning) -> silu -> conv3, plus a
/// residual path (1x1 conv when the channel count changes).
struct ResBlock {
    Conv1d conv1, conv2;
    Linear cond_proj;
    std::optional<Conv1d> shortcut;

    struct Cache {
        Matrix x, col1, h1, col2, col_skip;
    };

    ResBlock() = default;
    ResBlock(ParamLayout& layout, int in_channels, int out_channels, int cond_dim);
    void init(std::span<double> params, Rng& rng) const;
    /// `cond` is the already-activated conditioning vector.
    Matrix forward(const Matrix& x, const Vector& cond, ConstParams params, Cache& cache) const;
    /// Returns dL/dx and accumulates dL/dcond into `d_cond`.
    Matrix backward(const Matrix& dy, const Vector& cond, const Cache& cache, ConstParams params, Grads grads,
                    Vector& d_cond) const;
};

Matrix avg_pool2(const Matrix& x);
Matrix avg_pool2_backward(const Matrix& dy);
Matrix upsample2(const Matrix& x);
Matrix upsample2_backward(const Matrix& dy);

/// Index of the source frame for position i of a reflect-padded signal of
/// length n (repeated mirroring; always 0 when n == 1).
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n);
Matrix reflect_pad(const Matrix& x, Eigen::Index target_cols);
/// Folds the gradient of a padded signal back onto the original frames.
Matrix reflect_pad_backward(const Matrix& dy, Eigen::Index original_cols);

/// Sinusoidal embedding of a scalar (half sines, half cosines).
Vector sinusoidal_embedding(double value, int dim);

}  // namespace moodshift::nn
