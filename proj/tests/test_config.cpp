#include <fstream>

#include <gtest/gtest.h>

#include "moodshift/config.hpp"
#include "moodshift/error.hpp"
#include "test_util.hpp"

using namespace moodshift;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
}

}  // namespace

TEST(RunConfigDefaults, ValidAndRoundTrip) {
    const RunConfig c;
    EXPECT_NO_THROW(c.validate());
    const RunConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(config_to_json(back), config_to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(c.inference.n_steps, 50);
    EXPECT_DOUBLE_EQ(c.inference.bank_p, 0.2);
    EXPECT_EQ(c.training.lambda_mode, LambdaMode::OnX0);
}

TEST(RunConfigFile, UnknownKeyIsRejected) {
    testutil::TempDir dir;
    write(dir / "c.json", R"({"training": {"n_step": 10}})");
    try {
        resolve_config(dir / "c.json", {});
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("n_step"), std::string::npos) << e.what();
    }
    write(dir / "d.json", R"({"extras": {}})");
    EXPECT_THROW(resolve_config(dir / "d.json", {}), ConfigError);
}

TEST(RunConfigFile, TypeMismatchIsRejected) {
    testutil::TempDir dir;
    write(dir / "c.json", R"({"training": {"n_steps": "many"}})");
    EXPECT_THROW(resolve_config(dir / "c.json", {}), ConfigError);
    write(dir / "d.json", R"({"inference": {"targets": 3}})");
    EXPECT_THROW(resolve_config(dir / "d.json", {}), ConfigError);
    write(dir / "e.json", "{ not json");
    EXPECT_THROW(resolve_config(dir / "e.json", {}), ConfigError);
}

TEST(RunConfigFile, OverridesBeatFileBeatsDefaults) {
    testutil::TempDir dir;
    write(dir / "c.json", R"({"training": {"n_steps": 10, "batch_size": 4}})");
    const RunConfig c = resolve_config(dir / "c.json", {parse_override("training.n_steps=25")});
    EXPECT_EQ(c.training.n_steps, 25);
    EXPECT_EQ(c.training.batch_size, 4);
    EXPECT_EQ(c.inference.n_steps, 50);
    const RunConfig s = resolve_config({}, {parse_override("training.lambda_mode=on_xt")});
    EXPECT_EQ(s.training.lambda_mode, LambdaMode::OnXt);
    EXPECT_THROW(resolve_config({}, {parse_override("training.nope=1")}), ConfigError);
    EXPECT_THROW(parse_override("no_equals_sign"), ConfigError);
}

TEST(RunConfigValidation, RejectsOutOfRangeValues) {
    EXPECT_THROW(resolve_config({}, {parse_override("inference.bank_p=0")}), ConfigError);
    EXPECT_THROW(resolve_config({}, {parse_override("inference.targets=[1,9]")}), ConfigError);
    EXPECT_THROW(resolve_config({}, {parse_override("training.lambda_mode=\"bogus\"")}), ConfigError);
    EXPECT_THROW(resolve_config({}, {parse_override("schedule.b1=1.0")}), ConfigError);
}

TEST(RunConfigHash, StableAndSensitive) {
    const RunConfig a = resolve_config({}, {});
    const RunConfig b = resolve_config({}, {});
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(config_hash(a).size(), 16u);
    const RunConfig c = resolve_config({}, {parse_override("seeds.init=99")});
    EXPECT_NE(config_hash(a), config_hash(c));
}

TEST(SeedStreams, BaseSeedReplacesAll) {
    const SeedConfig a = SeedConfig::from_base(5), b = SeedConfig::from_base(5), c = SeedConfig::from_base(6);
    EXPECT_EQ(a.data, b.data);
    EXPECT_EQ(a.training, b.training);
    EXPECT_NE(a.data, c.data);
    EXPECT_NE(a.data, a.training);
}

TEST(DerivedConfigs, SectionsFeedModuleConfigs) {
    const RunConfig c = resolve_config({}, {parse_override("mel.n_mels=16"), parse_override("encoders.emotion_dim=8"),
                                            parse_override("seeds.training=77")});
    EXPECT_EQ(c.model_config().n_mels, 16);
    EXPECT_EQ(c.model_config().emotion_dim, 8);
    EXPECT_EQ(c.train_config().rng_seed, 77u);
    EXPECT_EQ(c.toy_config().mel.n_mels, 16);
    const auto enc = c.encoder_set();
    EXPECT_EQ(enc.emotion->dim(), 8);
}
