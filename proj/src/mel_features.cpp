#include "moodshift/mel_features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "moodshift/error.hpp"

namespace moodshift {

namespace {

// Real FFT of a fixed size with owned FFTW plans and buffers.
class RealFft {
public:
    explicit RealFft(int n)
        : n_(n),
          time_(fftw_alloc_real(static_cast<std::size_t>(n))),
          freq_(fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1))) {
        forward_ = fftw_plan_dft_r2c_1d(n_, time_, freq_, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_1d(n_, freq_, time_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
        fftw_free(time_);
        fftw_free(freq_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    int bins() const { return n_ / 2 + 1; }
    double* time() { return time_; }
    std::complex<double> bin(int k) const { return {freq_[k][0], freq_[k][1]}; }
    void set_bin(int k, std::complex<double> v) {
        freq_[k][0] = v.real();
        freq_[k][1] = v.imag();
    }
    void forward() { fftw_execute(forward_); }
    // Unnormalized: result is n times the true inverse.
    void inverse() { fftw_execute(inverse_); }

private:
    int n_;
    double* time_;
    fftw_complex* freq_;
    fftw_plan forward_;
    fftw_plan inverse_;
};

using ComplexMatrix = Eigen::MatrixXcd;

ComplexMatrix stft_complex(std::span<const double> samples, const MelConfig& cfg, RealFft& fft) {
    const int frames = frame_count(samples.size(), cfg);
    const auto window = hann_window(cfg.n_fft);
    ComplexMatrix spec(fft.bins(), frames);
    for (int f = 0; f < frames; ++f) {
        const std::size_t start = static_cast<std::size_t>(f) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            const std::size_t idx = start + i;
            fft.time()[i] = idx < samples.size() ? samples[idx] * window[i] : 0.0;
        }
        fft.forward();
        for (int k = 0; k < fft.bins(); ++k) spec(k, f) = fft.bin(k);
    }
    return spec;
}

// Weighted overlap-add inverse of stft_complex.
std::vector<double> istft(const ComplexMatrix& spec, const MelConfig& cfg, RealFft& fft) {
    const auto frames = static_cast<int>(spec.cols());
    const std::size_t length = static_cast<std::size_t>(cfg.n_fft) + static_cast<std::size_t>(frames - 1) * cfg.hop;
    const auto window = hann_window(cfg.n_fft);
    std::vector<double> out(length, 0.0);
    std::vector<double> norm(length, 0.0);
    for (int f = 0; f < frames; ++f) {
        for (int k = 0; k < fft.bins(); ++k) fft.set_bin(k, spec(k, f));
        fft.inverse();
        const std::size_t start = static_cast<std::size_t>(f) * cfg.hop;
        for (int i = 0; i < cfg.n_fft; ++i) {
            out[start + i] += fft.time()[i] / cfg.n_fft * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    for (std::size_t i = 0; i < length; ++i) {
        if (norm[i] > 1e-8) out[i] /= norm[i];
    }
    return out;
}

}  // namespace

void MelConfig::validate() const {
    if (sample_rate <= 0) throw ConfigError("mel.sample_rate must be positive");
    if (n_fft < 2) throw ConfigError("mel.n_fft must be at least 2");
    if (hop < 1 || hop > n_fft) throw ConfigError("mel.hop must be in [1, n_fft]");
    if (n_mels < 1) throw ConfigError("mel.n_mels must be at least 1");
    if (fmin < 0.0 || effective_fmax() <= fmin || effective_fmax() > 0.5 * sample_rate + 1e-9) {
        throw ConfigError("mel frequency range must satisfy 0 <= fmin < fmax <= sample_rate / 2");
    }
    if (!(log_floor > 0.0)) throw ConfigError("mel.log_floor must be positive");
}

int frame_count(std::size_t n_samples, const MelConfig& config) {
    const auto n_fft = static_cast<std::size_t>(config.n_fft);
    if (n_samples <= n_fft) return 1;
    return 1 + static_cast<int>((n_samples - n_fft) / static_cast<std::size_t>(config.hop));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_band_centres(const MelConfig& config) {
    const double lo = hz_to_mel(config.fmin);
    const double hi = hz_to_mel(config.effective_fmax());
    std::vector<double> centres(static_cast<std::size_t>(config.n_mels));
    for (int m = 0; m < config.n_mels; ++m) {
        centres[m] = mel_to_hz(lo + (hi - lo) * (m + 1) / (config.n_mels + 1));
    }
    return centres;
}

Matrix mel_filterbank(const MelConfig& config) {
    config.validate();
    const int bins = config.n_fft / 2 + 1;
    const double lo = hz_to_mel(config.fmin);
    const double hi = hz_to_mel(config.effective_fmax());
    std::vector<double> edges(static_cast<std::size_t>(config.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (config.n_mels + 1));
    }
    Matrix fb = Matrix::Zero(config.n_mels, bins);
    for (int m = 0; m < config.n_mels; ++m) {
        const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * config.sample_rate / config.n_fft;
            if (f > left && f < right) {
                fb(m, k) = f <= centre ? (f - left) / (centre - left) : (right - f) / (right - centre);
            }
        }
    }
    return fb;
}

std::vector<double> hann_window(int length) {
    std::vector<double> w(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
    }
    return w;
}

Matrix stft_magnitude(std::span<const double> samples, const MelConfig& config) {
    config.validate();
    RealFft fft(config.n_fft);
    return stft_complex(samples, config, fft).cwiseAbs();
}

MelSpectrogram mel_extract(std::span<const double> samples, const MelConfig& config) {
    if (samples.empty()) throw ContractError("mel_extract: empty waveform");
    for (double s : samples) {
        if (!std::isfinite(s)) throw ContractError("mel_extract: non-finite sample");
    }
    const Matrix mag = stft_magnitude(samples, config);
    const Matrix mel = mel_filterbank(config) * mag;
    return MelSpectrogram(mel.cwiseMax(config.log_floor).array().log().matrix(), config.frame_rate());
}

Waveform mel_invert(const MelSpectrogram& mel, const MelConfig& config, int n_gl_iters, std::uint64_t seed) {
    config.validate();
    if (mel.n_mels() != config.n_mels) throw ContractError("mel_invert: mel bin count does not match config");
    const Matrix fb = mel_filterbank(config);
    const Matrix energy = mel.values().array().exp().matrix();
    // Minimum-norm linear magnitude consistent with the mel energies.
    const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
    const Matrix magnitude = (pinv * energy).cwiseMax(0.0);

    RealFft fft(config.n_fft);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase_dist(-std::numbers::pi, std::numbers::pi);
    ComplexMatrix spec(magnitude.rows(), magnitude.cols());
    for (Eigen::Index f = 0; f < spec.cols(); ++f) {
        for (Eigen::Index k = 0; k < spec.rows(); ++k) spec(k, f) = std::polar(magnitude(k, f), phase_dist(rng));
    }
    std::vector<double> wave = istft(spec, config, fft);
    for (int it = 0; it < n_gl_iters; ++it) {
        const ComplexMatrix rebuilt = stft_complex(wave, config, fft);
        for (Eigen::Index f = 0; f < spec.cols(); ++f) {
            for (Eigen::Index k = 0; k < spec.rows(); ++k) {
                const std::complex<double> c = rebuilt(k, f);
                const double a = std::abs(c);
                spec(k, f) = a > 0.0 ? magnitude(k, f) * (c / a) : std::complex<double>(magnitude(k, f), 0.0);
            }
        }
        wave = istft(spec, config, fft);
    }
    return Waveform{std::move(wave), config.sample_rate};
}

}  // namespace moodshift
