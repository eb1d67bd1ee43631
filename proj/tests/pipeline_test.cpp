#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "plcont/error.hpp"
#include "plcont/pipeline.hpp"
#include "plcont/split_manifest.hpp"
#include "test_util.hpp"

namespace plcont {
namespace {

namespace fs = std::filesystem;

ExperimentConfig tiny_config(const fs::path& out) {
    ExperimentConfig c;
    SynthConfig s;
    s.n_playlists = 60;
    s.n_songs = 400;
    s.n_topics = 5;
    s.seed = 1;
    c.synth = s;
    c.features = {{"synth", "", "", 200}};
    c.grid_layers = {1, 2};
    c.grid_units = {8, 16, 32};
    c.train.max_epochs = 4;
    c.train.patience_epochs = 2;
    c.train.batch_size = 20;
    c.wmf.depth = 8;
    c.wmf.sweeps = 3;
    c.output_dir = out.string();
    return c;
}

TEST(ExperimentConfig, JsonRoundTripAndUnknownKeys) {
    auto c = tiny_config("x");
    c.wmf.weight_observed = 3.0;
    c.wmf_format = ModelFormat::binary;
    const auto doc = to_json(c, true);
    const auto back = experiment_config_from_json(doc);
    EXPECT_EQ(to_json(back, true), doc);
    EXPECT_EQ(back.digest(), c.digest());

    auto bad = doc;
    bad["mlp"]["layerz"] = 2;
    EXPECT_THROW(experiment_config_from_json(bad), ConfigError);
    bad = doc;
    bad["extra"] = 1;
    EXPECT_THROW(experiment_config_from_json(bad), ConfigError);
    bad = doc;
    bad["mlp"]["max_epochs"] = "many";
    EXPECT_THROW(experiment_config_from_json(bad), ConfigError);
}

TEST(ExperimentConfig, DigestIgnoresExecutionFields) {
    auto a = tiny_config("one");
    auto b = tiny_config("two");
    b.verbose = true;
    b.set_threads(3);
    EXPECT_EQ(a.digest(), b.digest());
    b.train.learning_rate = 0.25;
    EXPECT_NE(a.digest(), b.digest());
    b = a;
    b.set_seed(42);
    EXPECT_NE(a.digest(), b.digest());
    EXPECT_EQ(b.split.seed, 42u);
    EXPECT_EQ(b.train.seed, 42u);
    EXPECT_EQ(b.wmf.seed, 42u);
    EXPECT_EQ(b.synth->seed, 42u);
}

TEST(ExperimentConfig, LoadResolvesRelativePaths) {
    const auto dir = testing::scratch_dir("config_paths");
    testing::write_file(dir / "exp.json", R"({"corpus": {"path": "data/corpus.tsv"},
        "features": {"sources": [{"kind": "import", "path": "feat.tsv"}]}})");
    const auto c = load_experiment_config((dir / "exp.json").string());
    EXPECT_EQ(fs::path(c.corpus_path), dir / "data/corpus.tsv");
    EXPECT_EQ(fs::path(c.features.at(0).path), dir / "feat.tsv");
    EXPECT_THROW(load_experiment_config((dir / "none.json").string()), ConfigError);
    testing::write_file(dir / "bad.json", "{");
    EXPECT_THROW(load_experiment_config((dir / "bad.json").string()), ConfigError);
}

TEST(ExperimentConfig, ValidationRejectsInconsistentSettings) {
    auto c = tiny_config("v");
    c.features.clear();
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config("v");
    c.grid_units.clear();
    EXPECT_THROW(c.validate(), ConfigError);
    c = tiny_config("v");
    c.synth.reset();
    EXPECT_THROW(c.validate(), ConfigError);  // neither corpus path nor generator
}

TEST(StageError, KeepsCategoryAndStage) {
    try {
        in_stage("features", []() -> int { throw MissingFeatureError("no row for song x"); });
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "features");
        EXPECT_EQ(exit_code(e.category()), 3);
        EXPECT_NE(std::string(e.what()).find("features: "), std::string::npos);
    }
}

class PipelineRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = testing::scratch_dir("pipeline_run");
        result_ = run_pipeline(tiny_config(dir_ / "a"));
    }
    static fs::path dir_;
    static PipelineResult result_;
};
fs::path PipelineRun::dir_;
PipelineResult PipelineRun::result_;

TEST_F(PipelineRun, WritesExactlyTheArtifactSet) {
    ASSERT_EQ(result_.exit_code, 0) << result_.stage << ": " << result_.message;
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) names.insert(entry.path().filename().string());
    const std::set<std::string> expected = {artifact::splits,     artifact::features,      artifact::mlp_model,
                                            artifact::wmf_model,  artifact::report_mlp,    artifact::report_wmf,
                                            artifact::report_random, artifact::comparison};
    EXPECT_EQ(names, expected);
    EXPECT_EQ(result_.artifacts.size(), expected.size());
    ASSERT_TRUE(result_.comparison.has_value());
    EXPECT_EQ(result_.comparison->names, (std::vector<std::string>{"mlp", "wmf", "random"}));
}

TEST_F(PipelineRun, ArtifactsCarryDigestsAndGridLogs) {
    ASSERT_EQ(result_.exit_code, 0);
    const auto cfg_digest = tiny_config(dir_ / "a").digest();
    const auto mlp = read_json_file((dir_ / "a" / artifact::mlp_model).string());
    EXPECT_EQ(mlp.at("config_digest"), cfg_digest);
    ASSERT_EQ(mlp.at("grid").size(), 6u);
    for (const auto& cell : mlp.at("grid")) EXPECT_FALSE(cell.at("log").empty());
    EXPECT_NO_THROW(load_mlp_model((dir_ / "a" / artifact::mlp_model).string()));

    const auto split = load_split_manifest((dir_ / "a" / artifact::splits).string());
    const auto eval_digest = split_digest(evaluation_split(split));
    for (const char* name : {artifact::report_mlp, artifact::report_wmf, artifact::report_random}) {
        const auto report = load_report((dir_ / "a" / name).string());
        EXPECT_EQ(report.split_digest, eval_digest) << name;
        EXPECT_EQ(report.config_digest, cfg_digest) << name;
        EXPECT_EQ(report.bins.size(), 6u) << name;
    }
    const auto features = testing::read_file(dir_ / "a" / artifact::features);
    EXPECT_NE(features.find("config " + cfg_digest), std::string::npos);
    const auto wmf = load_factor_model((dir_ / "a" / artifact::wmf_model).string());
    EXPECT_EQ(wmf.provenance, "config " + cfg_digest);
}

TEST_F(PipelineRun, RerunIsByteIdentical) {
    ASSERT_EQ(result_.exit_code, 0);
    auto second = tiny_config(dir_ / "b");
    second.set_threads(2);  // thread count must not change results
    ASSERT_EQ(run_pipeline(second).exit_code, 0);
    for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
        const auto name = entry.path().filename();
        EXPECT_EQ(testing::read_file(entry.path()), testing::read_file(dir_ / "b" / name)) << name;
    }
}

TEST_F(PipelineRun, StagesReproduceFromArtifacts) {
    ASSERT_EQ(result_.exit_code, 0);
    const auto cfg = tiny_config(dir_ / "a");
    const auto split = load_split_manifest((dir_ / "a" / artifact::splits).string());
    const auto features = import_precomputed((dir_ / "a" / artifact::features).string(), "").features;
    const auto model = load_mlp_model((dir_ / "a" / artifact::mlp_model).string());
    const auto eval_split = evaluation_split(split);
    const EvaluationSet set(eval_split);
    const auto report = make_report(mlp_scores(model, features, set), set, eval_split, "mlp",
                                    model.architecture.describe(), features.manifest(), cfg);
    EXPECT_EQ(dump_json(to_json(report)), testing::read_file(dir_ / "a" / artifact::report_mlp));

    const auto wmf = load_factor_model((dir_ / "a" / artifact::wmf_model).string());
    const auto wmf_report = make_report(wmf_candidate_scores(wmf, set), set, eval_split, "wmf",
                                        "wmf depth=" + std::to_string(wmf.depth()), "listening interactions", cfg);
    EXPECT_EQ(dump_json(to_json(wmf_report)), testing::read_file(dir_ / "a" / artifact::report_wmf));
}

TEST(Pipeline, FailingStageLeavesMarkerAndEarlierArtifacts) {
    const auto dir = testing::scratch_dir("pipeline_fail");
    auto cfg = tiny_config(dir);
    cfg.features = {{"tags-song", (dir / "tags.tsv").string(), (dir / "missing_embeddings.txt").string(), 200}};
    testing::write_file(dir / "tags.tsv", "s000\trock\n");
    const auto result = run_pipeline(cfg);
    EXPECT_NE(result.exit_code, 0);
    EXPECT_EQ(result.stage, "features");
    EXPECT_TRUE(fs::exists(dir / artifact::splits));
    EXPECT_FALSE(fs::exists(dir / artifact::mlp_model));
    ASSERT_TRUE(fs::exists(dir / artifact::failed));
    EXPECT_NE(testing::read_file(dir / artifact::failed).find("features"), std::string::npos);
}

TEST(Pipeline, BadConfigFailsInConfigStage) {
    const auto dir = testing::scratch_dir("pipeline_badcfg");
    auto cfg = tiny_config(dir);
    cfg.grid_layers.clear();
    const auto result = run_pipeline(cfg);
    EXPECT_EQ(result.exit_code, 2);
    EXPECT_EQ(result.stage, "config");
}

TEST(Pipeline, ScoreSourceNames) {
    for (auto s : {ScoreSource::mlp, ScoreSource::wmf, ScoreSource::random})
        EXPECT_EQ(parse_score_source(to_string(s)), s);
    EXPECT_THROW(parse_score_source("svm"), ConfigError);
}

}  // namespace
}  // namespace plcont
