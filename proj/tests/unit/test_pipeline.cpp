#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gzsl/dataset.hpp"
#include "gzsl/error.hpp"
#include "gzsl/pipeline.hpp"

using namespace gzsl;
using namespace gzsl::pipeline;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode{};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gzsl_pipeline_" + name);
  fs::remove_all(dir);
  return dir;
}

// A dataset and config small enough to run end to end in about a second.
RunConfig small_run(const std::string& name) {
  const fs::path root = scratch(name);
  dataio::SyntheticSpec spec;
  spec.seen_classes = 3;
  spec.unseen_classes = 2;
  spec.feature_dim = 6;
  spec.attribute_dim = 4;
  spec.samples_per_class = 20;
  spec.seed = 11;
  dataio::write_gzb(dataio::make_synthetic(spec), root / "data");

  const dataio::Json j = {
      {"data", (root / "data").string()},
      {"out", (root / "out").string()},
      {"seed", 5},
      {"stage1",
       {{"epochs", 4},
        {"batch_size", 10},
        {"learning_rate", 1e-3},
        {"sizes",
         {{"visual_encoder_hidden", 8},
          {"semantic_encoder_hidden", 8},
          {"visual_decoder_hidden", 8},
          {"semantic_decoder_hidden", 8},
          {"latent_dim", 3}}}}},
      {"generation", {{"seen_per_class", 20}, {"unseen_per_class", 20}}},
      {"classifier", {{"epochs", 5}, {"batch_size", 16}}},
      {"evaluation", {{"n_bias", 20}}}};
  return config_from_json(j);
}

}  // namespace

TEST(PipelineConfig, DefaultsAndOverlay) {
  const RunConfig c = config_from_json(dataio::Json::parse(R"({"seed": 9, "ensemble": {"lambda_x": 0.25}})"));
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.ensemble.lambda_x, 0.25);
  EXPECT_EQ(c.ensemble.lambda_a, 1.0);
  EXPECT_EQ(c.stage1.epochs, 100);
  EXPECT_EQ(c.stage1.batch_size, 50u);
  EXPECT_EQ(c.generation.seen_per_class, 200u);
  EXPECT_EQ(c.generation.unseen_per_class, 400u);
  EXPECT_EQ(c.stage1.seed, numerics::derive_seed(9, 1));
  EXPECT_EQ(c.generation.seed, numerics::derive_seed(9, 2));
  EXPECT_EQ(c.classifier.seed, numerics::derive_seed(9, 3));
}

TEST(PipelineConfig, JsonRoundTrip) {
  const RunConfig c = small_run("roundtrip");
  const RunConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.stage1, c.stage1);
}

TEST(PipelineConfig, RejectsBadInput) {
  for (const char* text : {R"({"sead": 1})", R"({"stage1": {"epoch": 3}})",
                           R"({"stage1": {"sizes": {"visual_encoder": 3}}})",
                           R"({"evaluation": {"ausuc": "yes"}})", R"([1, 2])"}) {
    EXPECT_EQ(code_of([&] { config_from_json(dataio::Json::parse(text)); }), ErrorCode::kFormat)
        << text;
  }
  EXPECT_EQ(code_of([] { config_from_json(dataio::Json::parse(R"({"ensemble": {"lambda_a": -1}})")); }),
            ErrorCode::kUsage);
  EXPECT_EQ(code_of([] { config_from_json(dataio::Json::parse(R"({"evaluation": {"mode": "all"}})")); }),
            ErrorCode::kUsage);
}

TEST(Pipeline, MissingPredecessorIsUsageError) {
  RunConfig c = small_run("missing");
  Pipeline p(c);
  for (auto cmd : {"generate", "fit-classifiers", "calibrate", "evaluate", "ausuc", "distmat"}) {
    try {
      p.run(cmd);
      ADD_FAILURE() << cmd << " ran without its inputs";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kUsage) << cmd;
      EXPECT_NE(std::string(e.what()).find("run `gzsl"), std::string::npos) << e.what();
    }
  }
  EXPECT_EQ(code_of([&] { p.run("predict"); }), ErrorCode::kUsage);
}

TEST(Pipeline, MissingDatasetIsIoError) {
  RunConfig c = small_run("nodata");
  c.data_dir = c.out_dir / "absent";
  EXPECT_EQ(code_of([&] { Pipeline(c).run("train"); }), ErrorCode::kIo);
}

TEST(Pipeline, StepwiseRunWritesEveryArtifact) {
  const RunConfig c = small_run("steps");
  Pipeline p(c);
  for (auto cmd : kCommands) {
    if (std::string_view(cmd) != "run-all") p.run(cmd);
  }
  const fs::path out = c.out_dir;
  for (auto rel : {"model/manifest.json", "trainsets/manifest.json", "classifiers/z/manifest.json",
                   "classifiers/xr/manifest.json", "classifiers/ar/manifest.json", "eval.json",
                   "ausuc.json", "stage1_log.json", "run.json", "distmat/a.csv", "distmat/z.csv",
                   "distmat/xr.csv", "distmat/ar.csv", "distmat/x.csv", "distmat/manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / rel)) << rel;
  }
  for (auto rel : {"model", "trainsets", "classifiers/z", "classifiers/xr", "classifiers/ar",
                   "distmat"}) {
    EXPECT_EQ(dataio::read_json(out / rel / "manifest.json").at("seed"), 5) << rel;
  }
  for (auto rel : {"eval.json", "ausuc.json", "stage1_log.json", "run.json"}) {
    EXPECT_EQ(dataio::read_json(out / rel).at("seed"), 5) << rel;
  }
  const auto run = dataio::read_json(out / "run.json");
  EXPECT_EQ(run.at("commands").size(), 7u);
  EXPECT_EQ(run.at("config"), to_json(c));

  const auto eval = dataio::read_json(out / "eval.json");
  for (auto key : {"seen", "unseen", "H"}) {
    const double v = eval.at(key).get<double>();
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
  const auto log = dataio::read_json(out / "stage1_log.json").at("epochs");
  EXPECT_EQ(log.size(), 4u);
}

TEST(Pipeline, RunAllIsDeterministic) {
  RunConfig a = small_run("det_a");
  RunConfig b = small_run("det_b");
  Pipeline(a).run("run-all");
  Pipeline(b).run("run-all");
  EXPECT_EQ(slurp(a.out_dir / "eval.json"), slurp(b.out_dir / "eval.json"));
  EXPECT_EQ(slurp(a.out_dir / "ablation.json"), slurp(b.out_dir / "ablation.json"));
  EXPECT_EQ(slurp(a.out_dir / "trainsets" / "z.f32"), slurp(b.out_dir / "trainsets" / "z.f32"));
}

TEST(Pipeline, RunAllReportsFiveAblationRows) {
  const RunConfig c = small_run("ablation");
  const auto result = Pipeline(c).run("run-all");
  const auto rows = result.at("rows");
  ASSERT_EQ(rows.size(), 5u);
  std::vector<std::string> modes;
  for (const auto& r : rows) {
    modes.push_back(r.at("mode"));
    EXPECT_NEAR(r.at("H").get<double>(),
                eval::harmonic_mean(r.at("seen").get<double>(), r.at("unseen").get<double>()),
                1e-9);
    EXPECT_TRUE(r.contains("ausuc"));
  }
  EXPECT_EQ(modes, (std::vector<std::string>{"xr-only", "ar-only", "z-only", "tau1", "ensemble"}));
}

TEST(Pipeline, LatentOnlyModeEqualsZeroLambdas) {
  RunConfig c = small_run("zonly");
  Pipeline(c).run("run-all");
  c.evaluation.mode = eval::Mode::kLatentOnly;
  Pipeline(c).run("evaluate");
  const std::string z_only = slurp(c.out_dir / "eval.json");
  c.evaluation.mode = eval::Mode::kEnsemble;
  c.ensemble.lambda_x = 0.0;
  c.ensemble.lambda_a = 0.0;
  Pipeline(c).run("evaluate");
  EXPECT_EQ(slurp(c.out_dir / "eval.json"), z_only);
}

TEST(Pipeline, RunRecordRestartsWhenConfigChanges) {
  RunConfig c = small_run("record");
  Pipeline(c).run("train");
  Pipeline(c).run("generate");
  EXPECT_EQ(dataio::read_json(c.out_dir / "run.json").at("commands").size(), 2u);
  c.generation.seen_per_class = 10;
  Pipeline(c).run("generate");
  EXPECT_EQ(dataio::read_json(c.out_dir / "run.json").at("commands").size(), 1u);
}
