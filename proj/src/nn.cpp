#include "moodshift/nn.hpp"

#include <cmath>

#include "moodshift/error.hpp"

namespace moodshift::nn {

namespace {

using MatrixMap = Eigen::Map<const Matrix>;
using MatrixMapMut = Eigen::Map<Matrix>;
using VectorMap = Eigen::Map<const Vector>;
using VectorMapMut = Eigen::Map<Vector>;

void uniform_fill(std::span<double> params, ParamSlice slice, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < slice.size; ++i) params[slice.offset + i] = dist(rng);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Matrix silu(const Matrix& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Matrix silu_grad(const Matrix& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

Vector silu(const Vector& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Vector silu_grad(const Vector& x) {
    return x.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

Linear::Linear(ParamLayout& layout, int in_features, int out_features)
    : in(in_features),
      out(out_features),
      weight(layout.allocate(static_cast<std::size_t>(in_features) * out_features)),
      bias(layout.allocate(static_cast<std::size_t>(out_features))) {}

void Linear::init(std::span<double> params, Rng& rng) const {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_fill(params, weight, bound, rng);
    uniform_fill(params, bias, bound, rng);
}

Vector Linear::forward(const Vector& x, ConstParams params) const {
    const MatrixMap w(params.data() + weight.offset, out, in);
    const VectorMap b(params.data() + bias.offset, out);
    return w * x + b;
}

Vector Linear::backward(const Vector& dy, const Vector& x, ConstParams params, Grads grads) const {
    const MatrixMap w(params.data() + weight.offset, out, in);
    MatrixMapMut gw(grads.data() + weight.offset, out, in);
    VectorMapMut gb(grads.data() + bias.offset, out);
    gw.noalias() += dy * x.transpose();
    gb += dy;
    return w.transpose() * dy;
}

Conv1d::Conv1d(ParamLayout& layout, int in_channels, int out_channels, int kernel_size)
    : in(in_channels),
      out(out_channels),
      kernel(kernel_size),
      weight(layout.allocate(static_cast<std::size_t>(in_channels) * out_channels * kernel_size)),
      bias(layout.allocate(static_cast<std::size_t>(out_channels))) {
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ContractError("Conv1d kernel size must be odd");
}

void Conv1d::init(std::span<double> params, Rng& rng, double gain) const {
    const double bound = gain / std::sqrt(static_cast<double>(in * kernel));
    uniform_fill(params, weight, bound, rng);
    uniform_fill(params, bias, bound, rng);
}

Matrix Conv1d::forward(const Matrix& x, ConstParams params, Matrix& col) const {
    const Eigen::Index t = x.cols();
    const int half = kernel / 2;
    col.setZero(static_cast<Eigen::Index>(in) * kernel, t);
    for (int c = 0; c < in; ++c) {
        for (int j = 0; j < kernel; ++j) {
            const int shift = j - half;
            const Eigen::Index dst0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index dst1 = std::min<Eigen::Index>(t, t - shift);
            if (dst1 > dst0) {
                col.row(static_cast<Eigen::Index>(c) * kernel + j).segment(dst0, dst1 - dst0) =
                    x.row(c).segment(dst0 + shift, dst1 - dst0);
            }
        }
    }
    const MatrixMap w(params.data() + weight.offset, out, static_cast<Eigen::Index>(in) * kernel);
    const VectorMap b(params.data() + bias.offset, out);
    Matrix y = w * col;
    y.colwise() += b;
    return y;
}

Matrix Conv1d::backward(const Matrix& dy, const Matrix& col, ConstParams params, Grads grads) const {
    const Eigen::Index t = dy.cols();
    const int half = kernel / 2;
    const MatrixMap w(params.data() + weight.offset, out, static_cast<Eigen::Index>(in) * kernel);
    MatrixMapMut gw(grads.data() + weight.offset, out, static_cast<Eigen::Index>(in) * kernel);
    VectorMapMut gb(grads.data() + bias.offset, out);
    gw.noalias() += dy * col.transpose();
    gb += dy.rowwise().sum();
    const Matrix dcol = w.transpose() * dy;
    Matrix dx = Matrix::Zero(in, t);
    for (int c = 0; c < in; ++c) {
        for (int j = 0; j < kernel; ++j) {
            const int shift = j - half;
            const Eigen::Index dst0 = std::max<Eigen::Index>(0, -shift);
            const Eigen::Index dst1 = std::min<Eigen::Index>(t, t - shift);
            if (dst1 > dst0) {
                dx.row(c).segment(dst0 + shift, dst1 - dst0) +=
                    dcol.row(static_cast<Eigen::Index>(c) * kernel + j).segment(dst0, dst1 - dst0);
            }
        }
    }
    return dx;
}

ResBlock::ResBlock(ParamLayout& layout, int in_channels, int out_channels, int cond_dim)
    : conv1(layout, in_channels, out_channels, 3),
      conv2(layout, out_channels, out_channels, 3),
      cond_proj(layout, cond_dim, out_channels) {
    if (in_channels != out_channels) shortcut.emplace(layout, in_channels, out_channels, 1);
}

void ResBlock::init(std::span<double> params, Rng& rng) const {
    conv1.init(params, rng);
    conv2.init(params, rng);
    cond_proj.init(params, rng);
    if (shortcut) shortcut->init(params, rng);
}

Matrix ResBlock::forward(const Matrix& x, const Vector& cond, ConstParams params, Cache& cache) const {
    cache.x = x;
    Matrix h1 = conv1.forward(silu(x), params, cache.col1);
    h1.colwise() += cond_proj.forward(cond, params);
    Matrix y = conv2.forward(silu(h1), params, cache.col2);
    cache.h1 = std::move(h1);
    if (shortcut) {
        y += shortcut->forward(x, params, cache.col_skip);
    } else {
        y += x;
    }
    return y;
}

Matrix ResBlock::backward(const Matrix& dy, const Vector& cond, const Cache& cache, ConstParams params, Grads grads,
                          Vector& d_cond) const {
    const Matrix du2 = conv2.backward(dy, cache.col2, params, grads);
    const Matrix dh1 = du2.cwiseProduct(silu_grad(cache.h1));
    d_cond += cond_proj.backward(dh1.rowwise().sum(), cond, params, grads);
    const Matrix du1 = conv1.backward(dh1, cache.col1, params, grads);
    Matrix dx = du1.cwiseProduct(silu_grad(cache.x));
    if (shortcut) {
        dx += shortcut->backward(dy, cache.col_skip, params, grads);
    } else {
        dx += dy;
    }
    return dx;
}

Matrix avg_pool2(const Matrix& x) {
    if (x.cols() % 2 != 0) throw ContractError("avg_pool2 needs an even frame count");
    Matrix y(x.rows(), x.cols() / 2);
    for (Eigen::Index j = 0; j < y.cols(); ++j) y.col(j) = 0.5 * (x.col(2 * j) + x.col(2 * j + 1));
    return y;
}

Matrix avg_pool2_backward(const Matrix& dy) {
    Matrix dx(dy.rows(), dy.cols() * 2);
    for (Eigen::Index j = 0; j < dy.cols(); ++j) {
        dx.col(2 * j) = 0.5 * dy.col(j);
        dx.col(2 * j + 1) = 0.5 * dy.col(j);
    }
    return dx;
}

Matrix upsample2(const Matrix& x) {
    Matrix y(x.rows(), x.cols() * 2);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        y.col(2 * j) = x.col(j);
        y.col(2 * j + 1) = x.col(j);
    }
    return y;
}

Matrix upsample2_backward(const Matrix& dy) {
    Matrix dx(dy.rows(), dy.cols() / 2);
    for (Eigen::Index j = 0; j < dx.cols(); ++j) dx.col(j) = dy.col(2 * j) + dy.col(2 * j + 1);
    return dx;
}

Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (n <= 1) return 0;
    const Eigen::Index period = 2 * (n - 1);
    Eigen::Index j = i % period;
    if (j < 0) j += period;
    return j < n ? j : period - j;
}

Matrix reflect_pad(const Matrix& x, Eigen::Index target_cols) {
    Matrix y(x.rows(), target_cols);
    for (Eigen::Index j = 0; j < target_cols; ++j) y.col(j) = x.col(reflect_index(j, x.cols()));
    return y;
}

Matrix reflect_pad_backward(const Matrix& dy, Eigen::Index original_cols) {
    Matrix dx = Matrix::Zero(dy.rows(), original_cols);
    for (Eigen::Index j = 0; j < dy.cols(); ++j) dx.col(reflect_index(j, original_cols)) += dy.col(j);
    return dx;
}

Vector sinusoidal_embedding(double value, int dim) {
    Vector e = Vector::Zero(dim);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
        e[i] = std::sin(value * freq);
        e[half + i] = std::cos(value * freq);
    }
    return e;
}

}  // namespace moodshift::nn
