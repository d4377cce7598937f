#include <cmath>

#include <gtest/gtest.h>

#include "moodshift/error.hpp"
#include "moodshift/sde.hpp"

using namespace moodshift;

namespace {

// Composite Simpson rule over the linear rate, independent of the closed form.
double alpha_by_quadrature(double b0, double b1, double t, int intervals = 2000) {
    const double h = t / intervals;
    auto beta = [&](double s) { return b0 + s * (b1 - b0); };
    double sum = beta(0.0) + beta(t);
    for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * beta(i * h);
    return std::exp(-0.5 * sum * h / 3.0);
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST(NoiseSchedule, AlphaAtEndpoints) {
    const NoiseSchedule s;
    EXPECT_DOUBLE_EQ(s.alpha(0.0), 1.0);
    EXPECT_NEAR(s.alpha(1.0), std::exp(-5.0125), 1e-15);
    EXPECT_NEAR(s.alpha(1.0), 0.00666, 1e-5);
}

TEST(NoiseSchedule, AlphaMatchesQuadrature) {
    const NoiseSchedule s;
    // Frozen from an adaptive quadrature run outside this code base.
    constexpr double kFrozenAlphaHalf = 0.28383136567905354;
    EXPECT_NEAR(alpha_by_quadrature(0.05, 20.0, 0.5), kFrozenAlphaHalf, 1e-12);
    EXPECT_NEAR(s.alpha(0.5), kFrozenAlphaHalf, 1e-14);
    for (double t : {0.01, 0.1, 0.33, 0.77, 0.95}) {
        EXPECT_NEAR(s.alpha(t), alpha_by_quadrature(0.05, 20.0, t), 1e-12) << "t=" << t;
    }
}

TEST(NoiseSchedule, VarianceExamples) {
    const NoiseSchedule s;
    EXPECT_DOUBLE_EQ(s.variance(0.0), 0.0);
    EXPECT_NEAR(s.variance(1.0), 1.0 - 0.006654246877201174 * 0.006654246877201174, 1e-12);
    EXPECT_NEAR(s.variance(1.0), 0.99996, 1e-5);
}

TEST(NoiseSchedule, MonotoneOnGrid) {
    const NoiseSchedule s;
    double prev_alpha = s.alpha(0.0), prev_var = s.variance(0.0);
    for (int i = 1; i <= 1000; ++i) {
        const double t = i / 1000.0;
        EXPECT_LT(s.alpha(t), prev_alpha);
        EXPECT_GT(s.variance(t), prev_var);
        prev_alpha = s.alpha(t);
        prev_var = s.variance(t);
    }
}

TEST(NoiseSchedule, RejectsBadParameters) {
    EXPECT_THROW(NoiseSchedule(0.0, 20.0), DomainError);
    EXPECT_THROW(NoiseSchedule(20.0, 0.05), DomainError);
    EXPECT_THROW(NoiseSchedule(0.05, 5.0), DomainError);  // alpha(1) too large
    EXPECT_THROW(NoiseSchedule(0.05, 20.0, 0.0, 1.0), DomainError);
    EXPECT_THROW(NoiseSchedule(0.05, 20.0, 0.5, 0.4), DomainError);
    EXPECT_THROW(NoiseSchedule(0.05, 20.0, 0.01, 1.5), DomainError);
}

TEST(NoiseSchedule, TimeOutsideUnitIntervalIsDomainError) {
    const NoiseSchedule s;
    EXPECT_THROW(s.alpha(-0.1), DomainError);
    EXPECT_THROW(s.alpha(1.1), DomainError);
    EXPECT_THROW(s.variance(2.0), DomainError);
}

TEST(MeanEvolution, Examples) {
    const NoiseSchedule s;
    Matrix x0(2, 3), y(2, 3);
    x0 << 1, 2, 3, 4, 5, 6;
    y << -1, 0, 1, 0, 0, 2;
    EXPECT_EQ(mean_evolution(x0, y, 0.0, s), x0);
    const Matrix m1 = mean_evolution(x0, y, 1.0, s);
    EXPECT_LE((m1 - y).norm(), s.alpha(1.0) * (x0 - y).norm() + 1e-12);
    EXPECT_THROW(mean_evolution(x0, Matrix::Zero(3, 2), 0.5, s), ContractError);
}

TEST(MeanEvolution, ScalarSubstitution) {
    // Pick t with alpha_t = 0.5 by bisection; then mu = 0.5 * 2 + 0.5 * 0 = 1.
    const NoiseSchedule s;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (s.alpha(mid) > 0.5 ? lo : hi) = mid;
    }
    EXPECT_NEAR(mean_evolution(scalar(2.0), scalar(0.0), lo, s)(0, 0), 1.0, 1e-12);
    EXPECT_NEAR(s.variance(lo), 0.75, 1e-12);
}

TEST(SamplePerturbation, ZeroTimeReturnsCleanState) {
    const NoiseSchedule s;
    const Matrix x0 = Matrix::Random(4, 5), y = Matrix::Random(4, 5);
    const auto p = sample_perturbation(x0, y, 0.0, s, 7);
    EXPECT_EQ(p.x_t, x0);
    EXPECT_EQ(p.epsilon.rows(), 4);
    EXPECT_EQ(p.t, 0.0);
}

TEST(SamplePerturbation, DeterministicAndReconstructs) {
    const NoiseSchedule s;
    const Matrix x0 = Matrix::Random(3, 7), y = Matrix::Random(3, 7);
    const auto a = sample_perturbation(x0, y, 0.4, s, 99);
    const auto b = sample_perturbation(x0, y, 0.4, s, 99);
    EXPECT_EQ(a.x_t, b.x_t);
    EXPECT_EQ(a.epsilon, b.epsilon);
    const Matrix rebuilt = mean_evolution(x0, y, 0.4, s) + s.sigma(0.4) * a.epsilon;
    EXPECT_LE((rebuilt - a.x_t).cwiseAbs().maxCoeff(), 1e-15);
    const auto c = sample_perturbation(x0, y, 0.4, s, 100);
    EXPECT_NE(a.epsilon, c.epsilon);
}

TEST(SamplePerturbation, MonteCarloMomentsAtHalf) {
    const NoiseSchedule s;
    const int n = 10000;
    const auto p = sample_perturbation(Matrix::Constant(1, n, 2.0), Matrix::Zero(1, n), 0.5, s, 2024);
    const double mean = p.x_t.mean();
    const double var = (p.x_t.array() - mean).square().sum() / (n - 1);
    const double k_mean = 2.0 * s.alpha(0.5), k_var = s.variance(0.5);
    EXPECT_LE(std::abs(mean - k_mean), 3.0 * std::sqrt(k_var / n));
    EXPECT_LE(std::abs(var - k_var), 3.0 * k_var * std::sqrt(2.0 / (n - 1)));
}

TEST(AnalyticScore, Examples) {
    const NoiseSchedule s;
    const Matrix x0 = Matrix::Random(2, 4), y = Matrix::Random(2, 4);
    EXPECT_LE(analytic_score(mean_evolution(x0, y, 0.3, s), x0, y, 0.3, s).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(analytic_score(x0, x0, y, 0.0, s), DegenerateVarianceError);
}

TEST(AnalyticScore, ScalarSubstitution) {
    // x_t = 1.2, mu = 1.0, sigma^2 = 0.75 -> -0.2 / 0.75. Using the time with alpha = 0.5.
    const NoiseSchedule s;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (s.alpha(mid) > 0.5 ? lo : hi) = mid;
    }
    const double score = analytic_score(scalar(1.2), scalar(2.0), scalar(0.0), lo, s)(0, 0);
    EXPECT_NEAR(score, -0.2 / 0.75, 1e-10);
    EXPECT_NEAR(score, -0.2667, 1e-4);
    const Matrix x0_hat = tweedie_x0(scalar(1.2), scalar(score), scalar(0.0), lo, s);
    EXPECT_NEAR(x0_hat(0, 0), 2.0, 1e-10);
}

TEST(AnalyticScore, EqualsMinusEpsilonOverSigma) {
    const NoiseSchedule s;
    const Matrix x0 = Matrix::Random(5, 6), y = Matrix::Random(5, 6);
    for (double t : {0.05, 0.3, 0.9}) {
        const auto p = sample_perturbation(x0, y, t, s, 3);
        const Matrix score = analytic_score(p.x_t, x0, y, t, s);
        EXPECT_LE((score + p.epsilon / s.sigma(t)).cwiseAbs().maxCoeff(), 1e-9 / s.variance(t));
    }
}

TEST(Tweedie, RoundTripWhereverAlphaAboveFloor) {
    const NoiseSchedule s;
    const Matrix x0 = Matrix::Random(6, 9).array() + 2.0;
    const Matrix y = Matrix::Random(6, 9);
    for (int i = 1; i <= 100; ++i) {
        const double t = i / 100.0;
        if (s.alpha(t) < kDefaultAlphaFloor) continue;
        const auto p = sample_perturbation(x0, y, t, s, static_cast<std::uint64_t>(i));
        const Matrix x0_hat = tweedie_x0(p.x_t, analytic_score(p.x_t, x0, y, t, s), y, t, s);
        EXPECT_LT((x0_hat - x0).norm() / x0.norm(), 1e-6) << "t=" << t;
    }
}

TEST(Tweedie, SmallTimeLimitAndFloor) {
    const NoiseSchedule s;
    const Matrix x_t = Matrix::Random(2, 3), y = Matrix::Random(2, 3);
    const Matrix est = tweedie_x0(x_t, Matrix::Random(2, 3), y, 1e-9, s);
    EXPECT_LT((est - x_t).cwiseAbs().maxCoeff(), 1e-6);
    const NoiseSchedule steep(0.05, 40.0);
    ASSERT_LT(steep.alpha(1.0), kDefaultAlphaFloor);
    try {
        tweedie_x0(x_t, x_t, y, 1.0, steep);
        FAIL() << "expected IllConditionedTimeError";
    } catch (const IllConditionedTimeError& e) {
        EXPECT_NE(std::string(e.what()).find("0.001"), std::string::npos) << e.what();
    }
}

TEST(SimulateForward, ZeroNoiseApproachesMeanOde) {
    const NoiseSchedule s;
    const Matrix x0 = scalar(2.0), y = scalar(-1.0);
    double prev_err = 1e9;
    for (int steps : {100, 1000, 10000}) {
        const auto states = simulate_forward(x0, y, s, {steps, false}, 0);
        ASSERT_EQ(states.size(), static_cast<std::size_t>(steps + 1));
        const double err = std::abs(states.back()(0, 0) - mean_evolution(x0, y, 1.0, s)(0, 0));
        EXPECT_LT(err, prev_err);
        prev_err = err;
    }
    EXPECT_LT(prev_err, 1e-3);
}

TEST(SimulateForward, FixedPointWhenCleanEqualsAnchor) {
    const NoiseSchedule s;
    const int n = 4000;
    const Matrix y = Matrix::Constant(1, n, 0.7);
    simulate_forward(y, y, s, {200, true}, 5, [&](int, double t, const Matrix& x) {
        const double sd = std::sqrt(std::max(s.variance(t), 1e-12) / n);
        EXPECT_LE(std::abs(x.mean() - 0.7), 4.0 * sd + 1e-12) << "t=" << t;
    });
}

TEST(SimulateForward, DeterministicGivenSeed) {
    const NoiseSchedule s;
    const auto a = simulate_forward(Matrix::Zero(2, 2), Matrix::Ones(2, 2), s, {50, true}, 11);
    const auto b = simulate_forward(Matrix::Zero(2, 2), Matrix::Ones(2, 2), s, {50, true}, 11);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
