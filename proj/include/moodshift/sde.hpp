#pragma once

// Closed-form machinery of the mean-reverting diffusion
//
//   dX_t = 1/2 beta_t (Y - X_t) dt + sqrt(beta_t) dw,   beta_t = b0 + t (b1 - b0)
//
// whose perturbation kernel is Gaussian with mean alpha_t X0 + (1 - alpha_t) Y
// and variance 1 - alpha_t^2. All kernel math is done in double precision.

#include <cstdint>
#include <functional>
#include <vector>

#include "moodshift/mel.hpp"

namespace moodshift {

class NoiseSchedule {
public:
    /// Defaults give alpha(1) ~ 0.0067. Throws DomainError when b0 >= b1,
    /// either rate is non-positive, alpha(1) >= 0.01, or the training time
    /// interval is not inside (0, 1].
    explicit NoiseSchedule(double b0 = 0.05, double b1 = 20.0, double t_min = 0.01, double t_max = 1.0);

    double b0() const { return b0_; }
    double b1() const { return b1_; }
    double t_min() const { return t_min_; }
    double t_max() const { return t_max_; }

    double beta(double t) const;
    /// Integral of beta over [0, t].
    double beta_integral(double t) const;
    double alpha(double t) const;
    /// sigma(t)^2 = 1 - alpha_t^2.
    double variance(double t) const;
    double sigma(double t) const;

    bool operator==(const NoiseSchedule&) const = default;

private:
    double b0_;
    double b1_;
    double t_min_;
    double t_max_;
};

struct PerturbationSample {
    Matrix x_t;
    Matrix epsilon;
    double t = 0.0;
};

Matrix mean_evolution(const Matrix& x0, const Matrix& y, double t, const NoiseSchedule& schedule);

/// X_t = mu(t) + sigma(t) eps with eps ~ N(0, I) drawn from `seed`. At t = 0
/// the draw is still recorded but x_t equals x0.
PerturbationSample sample_perturbation(const Matrix& x0, const Matrix& y, double t,
                                       const NoiseSchedule& schedule, std::uint64_t seed);

/// Exact score of the Gaussian kernel, -(X_t - mu(t)) / sigma(t)^2.
/// Throws DegenerateVarianceError at t = 0.
Matrix analytic_score(const Matrix& x_t, const Matrix& x0, const Matrix& y, double t,
                      const NoiseSchedule& schedule);

inline constexpr double kDefaultAlphaFloor = 1e-3;

/// One-step reconstruction of X0 from a noisy state and a score estimate:
/// mu_hat = X_t + sigma^2 * score, X0_hat = (mu_hat - (1 - alpha) Y) / alpha.
/// Throws IllConditionedTimeError when alpha_t < alpha_floor.
Matrix tweedie_x0(const Matrix& x_t, const Matrix& score_value, const Matrix& y, double t,
                  const NoiseSchedule& schedule, double alpha_floor = kDefaultAlphaFloor);

struct ForwardSimOptions {
    int n_steps = 1000;
    // When false the Wiener increment is forced to zero (mean ODE).
    bool noise = true;
};

/// Euler-Maruyama integration of the forward SDE over [0, 1]. Every matrix
/// entry is an independent path. The observer sees (step, t, state) for the
/// initial state and after every step.
void simulate_forward(const Matrix& x0, const Matrix& y, const NoiseSchedule& schedule,
                      const ForwardSimOptions& options, std::uint64_t seed,
                      const std::function<void(int, double, const Matrix&)>& observer);

/// Convenience overload returning all n_steps + 1 states.
std::vector<Matrix> simulate_forward(const Matrix& x0, const Matrix& y, const NoiseSchedule& schedule,
                                     const ForwardSimOptions& options, std::uint64_t seed);

}  // namespace moodshift
