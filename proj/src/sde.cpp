#include "moodshift/sde.hpp"

#include <cmath>
#include <sstream>

#include "moodshift/error.hpp"
#include "moodshift/random.hpp"

namespace moodshift {

namespace {

void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0)) {
        std::ostringstream os;
        os << "diffusion time " << t << " outside [0, 1]";
        throw DomainError(os.str());
    }
}

}  // namespace

NoiseSchedule::NoiseSchedule(double b0, double b1, double t_min, double t_max)
    : b0_(b0), b1_(b1), t_min_(t_min), t_max_(t_max) {
    if (!(b0_ > 0.0 && b1_ > 0.0)) throw DomainError("noise schedule rates must be positive");
    if (!(b0_ < b1_)) throw DomainError("noise schedule requires b0 < b1");
    if (!(t_min_ > 0.0 && t_min_ < t_max_ && t_max_ <= 1.0)) {
        throw DomainError("noise schedule requires 0 < t_min < t_max <= 1");
    }
    if (!(alpha(1.0) < 0.01)) {
        std::ostringstream os;
        os << "noise schedule does not reach the prior: alpha(1) = " << alpha(1.0) << " (need < 0.01)";
        throw DomainError(os.str());
    }
}

double NoiseSchedule::beta(double t) const {
    check_time(t);
    return b0_ + t * (b1_ - b0_);
}

double NoiseSchedule::beta_integral(double t) const {
    check_time(t);
    return b0_ * t + 0.5 * (b1_ - b0_) * t * t;
}

double NoiseSchedule::alpha(double t) const { return std::exp(-0.5 * beta_integral(t)); }

double NoiseSchedule::variance(double t) const {
    // 1 - exp(-I) without cancellation for small t.
    return -std::expm1(-beta_integral(t));
}

double NoiseSchedule::sigma(double t) const { return std::sqrt(variance(t)); }

Matrix mean_evolution(const Matrix& x0, const Matrix& y, double t, const NoiseSchedule& schedule) {
    require_same_shape(x0, y, "mean_evolution");
    const double a = schedule.alpha(t);
    return a * x0 + (1.0 - a) * y;
}

PerturbationSample sample_perturbation(const Matrix& x0, const Matrix& y, double t,
                                       const NoiseSchedule& schedule, std::uint64_t seed) {
    require_same_shape(x0, y, "sample_perturbation");
    Rng rng(seed);
    PerturbationSample s;
    s.t = t;
    s.epsilon = standard_normal(x0.rows(), x0.cols(), rng);
    if (t == 0.0) {
        s.x_t = x0;
    } else {
        s.x_t = mean_evolution(x0, y, t, schedule) + schedule.sigma(t) * s.epsilon;
    }
    return s;
}

Matrix analytic_score(const Matrix& x_t, const Matrix& x0, const Matrix& y, double t,
                      const NoiseSchedule& schedule) {
    require_same_shape(x_t, x0, "analytic_score");
    require_same_shape(x0, y, "analytic_score");
    const double var = schedule.variance(t);
    if (!(var > 0.0)) throw DegenerateVarianceError("score is undefined at t = 0 (zero kernel variance)");
    return -(x_t - mean_evolution(x0, y, t, schedule)) / var;
}

Matrix tweedie_x0(const Matrix& x_t, const Matrix& score_value, const Matrix& y, double t,
                  const NoiseSchedule& schedule, double alpha_floor) {
    require_same_shape(x_t, score_value, "tweedie_x0");
    require_same_shape(x_t, y, "tweedie_x0");
    const double a = schedule.alpha(t);
    if (a < alpha_floor) {
        std::ostringstream os;
        os << "alpha(" << t << ") = " << a << " is below the floor " << alpha_floor
           << "; X0 reconstruction is ill-conditioned";
        throw IllConditionedTimeError(os.str());
    }
    const Matrix mu_hat = x_t + schedule.variance(t) * score_value;
    return (mu_hat - (1.0 - a) * y) / a;
}

void simulate_forward(const Matrix& x0, const Matrix& y, const NoiseSchedule& schedule,
                      const ForwardSimOptions& options, std::uint64_t seed,
                      const std::function<void(int, double, const Matrix&)>& observer) {
    require_same_shape(x0, y, "simulate_forward");
    if (options.n_steps < 1) throw ContractError("simulate_forward needs n_steps >= 1");
    Rng rng(seed);
    const double dt = 1.0 / options.n_steps;
    Matrix x = x0;
    observer(0, 0.0, x);
    for (int k = 0; k < options.n_steps; ++k) {
        const double t = k * dt;
        const double b = schedule.beta(t);
        x += 0.5 * b * (y - x) * dt;
        if (options.noise) x += std::sqrt(b * dt) * standard_normal(x.rows(), x.cols(), rng);
        observer(k + 1, (k + 1) * dt, x);
    }
}

std::vector<Matrix> simulate_forward(const Matrix& x0, const Matrix& y, const NoiseSchedule& schedule,
                                     const ForwardSimOptions& options, std::uint64_t seed) {
    std::vector<Matrix> states;
    states.reserve(static_cast<std::size_t>(options.n_steps) + 1);
    simulate_forward(x0, y, schedule, options, seed,
                     [&](int, double, const Matrix& x) { states.push_back(x); });
    return states;
}

}  // namespace moodshift
