#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "moodshift/error.hpp"
#include "moodshift/random.hpp"
#include "moodshift/training.hpp"
#include "test_util.hpp"

using namespace moodshift;

namespace {

ScoreModelConfig small_config() {
    ScoreModelConfig c;
    c.n_mels = 5;
    c.base_channels = 8;
    c.depth = 1;
    c.time_embed_dim = 8;
    c.speaker_dim = 4;
    c.emotion_dim = 3;
    return c;
}

std::vector<TrainingExample> toy_examples(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    std::vector<TrainingExample> out;
    for (int i = 0; i < n; ++i) {
        const int frames = 4 + i % 5;
        TrainingExample e;
        e.utterance_id = "u" + std::to_string(i);
        e.x0 = Matrix::NullaryExpr(5, frames, [&] { return g(rng); });
        e.y = Matrix::NullaryExpr(5, frames, [&] { return 0.5 * g(rng); });
        e.speaker = Vector::NullaryExpr(4, [&] { return g(rng); }).normalized();
        e.emotion = Vector::NullaryExpr(3, [&] { return g(rng); });
        out.push_back(std::move(e));
    }
    return out;
}

TrainConfig small_train_config(LambdaMode mode) {
    TrainConfig c;
    c.batch_size = 3;
    c.n_steps = 6;
    c.optimizer.learning_rate = 1e-3;
    c.lambda_mode = mode;
    c.rng_seed = 42;
    return c;
}

// Direct evaluation of the composite objective from its definition.
double objective_oracle(const ScoreModel& model, const std::vector<const TrainingExample*>& batch,
                        const std::vector<SampleDraw>& draws, LambdaMode mode, ScoreWeighting weighting) {
    const auto& s = model.schedule();
    double total = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& ex = *batch[b];
        const double t = draws[b].t;
        const Matrix x_t = s.alpha(t) * ex.x0 + (1 - s.alpha(t)) * ex.y + s.sigma(t) * draws[b].epsilon;
        const Matrix score = model.evaluate(x_t, {ex.y, ex.speaker, ex.emotion, t});
        double sm = (score + draws[b].epsilon / s.sigma(t)).squaredNorm();
        if (weighting == ScoreWeighting::Variance) sm *= s.variance(t);
        double mel = 0.0;
        if (mode == LambdaMode::OnXt) mel = (x_t - ex.x0).cwiseAbs().sum();
        if (mode == LambdaMode::OnX0) {
            const Matrix x0_hat = (x_t + s.variance(t) * score - (1 - s.alpha(t)) * ex.y) / s.alpha(t);
            mel = (x0_hat - ex.x0).cwiseAbs().sum();
        }
        total += sm + (1 - t * t) * mel;
    }
    return total / batch.size();
}

}  // namespace

TEST(Losses, ScoreLossExamples) {
    const NoiseSchedule s;
    const Matrix eps = Matrix::Random(3, 4);
    EXPECT_NEAR(score_loss(-eps / s.sigma(0.4), eps, 0.4, s), 0.0, 1e-20);
    const Matrix zeros = Matrix::Zero(3, 4);
    EXPECT_NEAR(score_loss(zeros, eps, 0.4, s), eps.squaredNorm() / s.variance(0.4), 1e-9);
    EXPECT_THROW(score_loss(zeros, eps, 0.0, s), DegenerateVarianceError);
    const std::vector<Matrix> preds{zeros, -eps / s.sigma(0.7)};
    const std::vector<Matrix> epss{eps, eps};
    const std::vector<double> ts{0.4, 0.7};
    EXPECT_NEAR(score_loss(preds, epss, ts, s), 0.5 * eps.squaredNorm() / s.variance(0.4), 1e-9);
}

TEST(Losses, MelLossMatchesLoop) {
    Matrix a(2, 3), b(2, 3);
    a << 1, -2, 3, 0.5, 0, 7;
    b << 0, 0, 3, -0.5, 2, 6;
    double loop = 0.0;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) loop += std::abs(a(r, c) - b(r, c));
    EXPECT_DOUBLE_EQ(mel_loss(a, b), loop);
    EXPECT_DOUBLE_EQ(mel_loss(a, b), 7.0);
    EXPECT_THROW(mel_loss(a, Matrix::Zero(3, 2)), ContractError);
}

TEST(Losses, LambdaWeight) {
    EXPECT_DOUBLE_EQ(lambda_weight(0.0), 1.0);
    EXPECT_DOUBLE_EQ(lambda_weight(0.5), 0.75);
    EXPECT_DOUBLE_EQ(lambda_weight(1.0), 0.0);
}

TEST(Losses, ModeNamesRoundTrip) {
    for (auto m : {LambdaMode::None, LambdaMode::OnXt, LambdaMode::OnX0})
        EXPECT_EQ(parse_lambda_mode(to_string(m)), m);
    for (auto w : {ScoreWeighting::None, ScoreWeighting::Variance})
        EXPECT_EQ(parse_score_weighting(to_string(w)), w);
    EXPECT_THROW(parse_lambda_mode("sometimes"), ConfigError);
}

class ObjectiveTest : public ::testing::TestWithParam<std::tuple<LambdaMode, ScoreWeighting>> {};

TEST_P(ObjectiveTest, ValueMatchesOracle) {
    const auto [mode, weighting] = GetParam();
    const auto model = ScoreModel::init(small_config(), NoiseSchedule(), 3);
    const auto data = toy_examples(3, 1);
    const auto cfg = small_train_config(mode);
    std::vector<const TrainingExample*> batch;
    std::vector<SampleDraw> draws;
    for (std::size_t i = 0; i < data.size(); ++i) {
        batch.push_back(&data[i]);
        draws.push_back(draw_sample(cfg, data[i], i));
    }
    const auto r = batch_objective(model, batch, draws, {mode, weighting, 1e-3}, {});
    EXPECT_NEAR(r.total, objective_oracle(model, batch, draws, mode, weighting), 1e-9 * std::abs(r.total));
    EXPECT_NEAR(r.total, r.score + r.mel, 1e-12 * std::abs(r.total));
}

TEST_P(ObjectiveTest, GradientMatchesFiniteDifferences) {
    const auto [mode, weighting] = GetParam();
    const auto model = ScoreModel::init(small_config(), NoiseSchedule(), 5);
    const auto data = toy_examples(2, 2);
    const auto cfg = small_train_config(mode);
    std::vector<const TrainingExample*> batch{&data[0], &data[1]};
    std::vector<SampleDraw> draws{draw_sample(cfg, data[0], 0), draw_sample(cfg, data[1], 1)};
    const ObjectiveOptions opt{mode, weighting, 1e-3};
    std::vector<double> grads(model.parameter_count(), 0.0);
    batch_objective(model, batch, draws, opt, grads);

    Rng rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, model.parameter_count() - 1);
    for (int k = 0; k < 12; ++k) {
        const std::size_t i = pick(rng);
        auto plus = model, minus = model;
        const double h = 1e-6;
        plus.parameters()[i] += h;
        minus.parameters()[i] -= h;
        const double fd = (batch_objective(plus, batch, draws, opt, {}).total -
                           batch_objective(minus, batch, draws, opt, {}).total) /
                          (2 * h);
        const double denom = std::max({std::abs(fd), std::abs(grads[i]), 1e-4});
        EXPECT_LE(std::abs(fd - grads[i]) / denom, 1e-4) << "param " << i << ": fd " << fd << " vs " << grads[i];
    }
}

INSTANTIATE_TEST_SUITE_P(AllModes, ObjectiveTest,
                         ::testing::Combine(::testing::Values(LambdaMode::None, LambdaMode::OnXt, LambdaMode::OnX0),
                                            ::testing::Values(ScoreWeighting::None, ScoreWeighting::Variance)));

TEST(Objective, ReconstructionOnNoisyStateHasNoParameterGradient) {
    const auto model = ScoreModel::init(small_config(), NoiseSchedule(), 6);
    const auto data = toy_examples(2, 3);
    const auto cfg = small_train_config(LambdaMode::OnXt);
    std::vector<const TrainingExample*> batch{&data[0], &data[1]};
    std::vector<SampleDraw> draws{draw_sample(cfg, data[0], 0), draw_sample(cfg, data[1], 1)};
    std::vector<double> g_xt(model.parameter_count(), 0.0), g_none(model.parameter_count(), 0.0);
    const auto r_xt = batch_objective(model, batch, draws, {LambdaMode::OnXt}, g_xt);
    const auto r_none = batch_objective(model, batch, draws, {LambdaMode::None}, g_none);
    EXPECT_EQ(g_xt, g_none);
    EXPECT_GT(r_xt.mel, 0.0);
    EXPECT_EQ(r_none.mel, 0.0);
}

TEST(Objective, LowAlphaSamplesSkipTheReconstructionTerm) {
    const auto model = ScoreModel::init(small_config(), NoiseSchedule(), 6);
    const auto data = toy_examples(1, 4);
    std::vector<const TrainingExample*> batch{&data[0]};
    std::vector<SampleDraw> draws{{0.999, Matrix::Random(5, data[0].x0.cols())}};
    const auto r = batch_objective(model, batch, draws, {LambdaMode::OnX0, ScoreWeighting::Variance, 0.5}, {});
    EXPECT_EQ(r.mel_skipped, 1);
    EXPECT_EQ(r.mel, 0.0);
}

TEST(Draws, DeterministicAndInRange) {
    const auto cfg = small_train_config(LambdaMode::OnX0);
    const auto data = toy_examples(1, 5);
    for (std::uint64_t i = 0; i < 200; ++i) {
        const auto a = draw_sample(cfg, data[0], i);
        const auto b = draw_sample(cfg, data[0], i);
        EXPECT_EQ(a.t, b.t);
        EXPECT_EQ(a.epsilon, b.epsilon);
        EXPECT_GE(a.t, cfg.schedule.t_min());
        EXPECT_LE(a.t, cfg.schedule.t_max());
        EXPECT_EQ(a.epsilon.rows(), data[0].x0.rows());
        EXPECT_EQ(a.epsilon.cols(), data[0].x0.cols());
    }
}

TEST(AdamOptimizer, MatchesHandComputedSteps) {
    AdamConfig c{0.1, 0.9, 0.999, 1e-8};
    Adam adam(c, 2);
    std::vector<double> p{1.0, -1.0};
    const std::vector<double> g1{0.5, -2.0};
    adam.update(p, g1);
    // First step: bias-corrected moments equal g and g^2, so each moves by lr * sign(g).
    EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p[1], -1.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
    const double after_first = p[0];
    const std::vector<double> g2{1.0, 0.0};
    adam.update(p, g2);
    const double m = 0.9 * 0.05 + 0.1 * 1.0, v = 0.999 * 0.00025 + 0.001 * 1.0;
    const double step = 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
    EXPECT_NEAR(p[0], after_first - step, 1e-14);
    EXPECT_EQ(adam.steps(), 2);
}

TEST(TrainerLoop, BatchesCoverEveryExampleEachEpoch) {
    const auto data = toy_examples(7, 6);
    auto cfg = small_train_config(LambdaMode::OnX0);
    cfg.batch_size = 7;
    Trainer trainer(cfg, ScoreModel::init(small_config(), cfg.schedule, 1), data);
    for (int step = 0; step < 4; ++step) {
        const auto idx = trainer.batch_indices(step);
        EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 7u);
    }
    EXPECT_NE(trainer.batch_indices(0), trainer.batch_indices(1));
}

TEST(TrainerLoop, ResumeIsBitwiseIdentical) {
    const auto data = toy_examples(5, 7);
    const auto cfg = small_train_config(LambdaMode::OnX0);
    const auto init = ScoreModel::init(small_config(), cfg.schedule, 2);

    Trainer straight(cfg, init, data);
    std::vector<LossReport> full;
    for (int i = 0; i < 6; ++i) full.push_back(straight.step());

    Trainer first(cfg, init, data);
    for (int i = 0; i < 3; ++i) first.step();
    testutil::TempDir dir;
    first.checkpoint().write(dir / "mid.ckpt");
    Trainer second = Trainer::resume(cfg, Checkpoint::read(dir / "mid.ckpt"), data);
    EXPECT_EQ(second.current_step(), 3);
    for (int i = 3; i < 6; ++i) {
        const auto r = second.step();
        EXPECT_EQ(r.total, full[i].total) << "step " << i;
        EXPECT_EQ(r.step, full[i].step);
    }
    const auto a = straight.model().parameters(), b = second.model().parameters();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
    EXPECT_EQ(straight.checkpoint().to_bytes(), second.checkpoint().to_bytes());
}

TEST(TrainerLoop, LossDecreasesOnFixedBatch) {
    const auto data = toy_examples(3, 8);
    auto cfg = small_train_config(LambdaMode::OnX0);
    cfg.optimizer.learning_rate = 3e-3;
    auto model = ScoreModel::init(small_config(), cfg.schedule, 3);
    std::vector<const TrainingExample*> batch{&data[0], &data[1], &data[2]};
    std::vector<SampleDraw> draws;
    for (std::size_t i = 0; i < 3; ++i) draws.push_back(draw_sample(cfg, data[i], i));
    const ObjectiveOptions opt{cfg.lambda_mode, cfg.score_weighting};
    Adam adam(cfg.optimizer, model.parameter_count());
    std::vector<double> grads(model.parameter_count());
    const double before = batch_objective(model, batch, draws, opt, {}).total;
    for (int i = 0; i < 100; ++i) {
        std::fill(grads.begin(), grads.end(), 0.0);
        batch_objective(model, batch, draws, opt, grads);
        adam.update(model.parameters(), grads);
    }
    EXPECT_LT(batch_objective(model, batch, draws, opt, {}).total, 0.5 * before);
}

TEST(TrainerLoop, RunWritesLogAndCheckpoints) {
    testutil::TempDir dir;
    const auto data = toy_examples(4, 9);
    auto cfg = small_train_config(LambdaMode::OnX0);
    cfg.checkpoint_every = 2;
    cfg.n_steps = 4;
    Trainer trainer(cfg, ScoreModel::init(small_config(), cfg.schedule, 4), data);
    const auto reports = run_training(trainer, {dir.path(), {}});
    EXPECT_EQ(reports.size(), 4u);
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_2.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint_4.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "final.ckpt"));
    std::ifstream log(dir / "loss_log.csv");
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) ++lines;
    EXPECT_EQ(lines, 5);
}

TEST(TrainerLoop, ConfigValidation) {
    auto cfg = small_train_config(LambdaMode::OnX0);
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_train_config(LambdaMode::OnX0);
    cfg.optimizer.learning_rate = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_train_config(LambdaMode::OnX0);
    EXPECT_THROW(Trainer(cfg, ScoreModel::init(small_config(), cfg.schedule, 1), {}), ContractError);
}

TEST(Objective, ReconstructionWeightFadesNearTheEnd) {
    // Matched raw mel loss: the same sample at t > 0.99 and t < 0.1 in OnXt mode.
    const auto model = ScoreModel::init(small_config(), NoiseSchedule(), 7);
    const auto data = toy_examples(1, 10);
    std::vector<const TrainingExample*> batch{&data[0]};
    const Matrix eps = Matrix::Random(5, data[0].x0.cols());
    const auto& s = model.schedule();
    auto weighted_per_raw = [&](double t) {
        const auto r = batch_objective(model, batch, std::vector<SampleDraw>{{t, eps}}, {LambdaMode::OnXt}, {});
        const Matrix x_t = s.alpha(t) * data[0].x0 + (1 - s.alpha(t)) * data[0].y + s.sigma(t) * eps;
        return r.mel / mel_loss(x_t, data[0].x0);
    };
    EXPECT_LE(weighted_per_raw(0.995), 0.02 * weighted_per_raw(0.05));
    EXPECT_NEAR(weighted_per_raw(0.05), lambda_weight(0.05), 1e-12);
}

TEST(TrainerLoop, TinyModelLearnsTheAnalyticScoreOfAPointMass) {
    // Scalar toy: X0 = 2, Y = 0. The score-matching minimizer is the analytic score.
    ScoreModelConfig mc = small_config();
    mc.n_mels = 1;
    TrainingExample ex;
    ex.utterance_id = "point";
    ex.x0 = Matrix::Constant(1, 4, 2.0);
    ex.y = Matrix::Zero(1, 4);
    ex.speaker = Vector::Unit(4, 0);
    ex.emotion = Vector::Zero(3);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.n_steps = 3000;
    cfg.optimizer.learning_rate = 3e-3;
    cfg.lambda_mode = LambdaMode::None;
    cfg.rng_seed = 3;
    Trainer trainer(cfg, ScoreModel::init(mc, cfg.schedule, 5), {ex});
    for (int i = 0; i < cfg.n_steps; ++i) trainer.step();

    const auto& s = trainer.model().schedule();
    double err2 = 0.0, ref2 = 0.0;
    for (double t = 0.13; t <= 1.0; t += 0.11) {
        for (double k = -1.75; k <= 1.75; k += 0.5) {
            const Matrix x = Matrix::Constant(1, 4, s.alpha(t) * 2.0 + k * s.sigma(t));
            const Matrix want = analytic_score(x, ex.x0, ex.y, t, s);
            const Matrix got = trainer.model().evaluate(x, {ex.y, ex.speaker, ex.emotion, t});
            err2 += (got - want).squaredNorm();
            ref2 += want.squaredNorm();
        }
    }
    RecordProperty("relative_l2", std::to_string(std::sqrt(err2 / ref2)));
    EXPECT_LE(std::sqrt(err2 / ref2), 0.1);
}
