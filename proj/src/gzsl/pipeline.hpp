#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "gzsl/cadavae.hpp"
#include "gzsl/ensemble.hpp"
#include "gzsl/eval.hpp"
#include "gzsl/latentgen.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::pipeline {

inline constexpr std::string_view kVersion = "1.0.0";

struct EvaluationFlags {
  eval::Mode mode = eval::Mode::kEnsemble;
  bool ausuc = true;
  std::size_t n_bias = 200;
  bool distance_matrices = true;
  eval::Metric metric = eval::Metric::kL2;
  bool ablation = true;
};

// Everything needed to replay a run. Stage seeds are derived from `seed`.
struct RunConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  cadavae::Stage1Config stage1;
  latentgen::GenConfig generation;
  double holdout_fraction = 0.1;
  ensemble::ClassifierConfig classifier;
  ensemble::EnsembleConfig ensemble;
  ensemble::CalibrationOptions calibration;
  EvaluationFlags evaluation;
};

// Overlays the keys present in `j` onto `base`.
RunConfig config_from_json(const dataio::Json& j, RunConfig base = {});
dataio::Json to_json(const RunConfig& config);

// The stage seeds used for a master seed.
RunConfig with_derived_seeds(RunConfig config);

inline constexpr std::string_view kCommands[] = {
    "train", "generate", "fit-classifiers", "calibrate", "evaluate", "ausuc", "distmat", "run-all"};

// Runs pipeline commands against an output directory. Each command reads its
// predecessors' artifacts from disk, so commands may run in separate processes.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config);

  const RunConfig& config() const noexcept { return config_; }

  // Returns a JSON summary of what the command produced.
  dataio::Json run(std::string_view command);

 private:
  dataio::Json train();
  dataio::Json generate();
  dataio::Json fit_classifiers();
  dataio::Json calibrate();
  dataio::Json evaluate();
  dataio::Json ausuc();
  dataio::Json distmat();
  dataio::Json run_all();

  const dataio::GzslDataset& dataset();
  void record(std::string_view command, double seconds);

  RunConfig config_;
  std::optional<dataio::GzslDataset> dataset_;
};

}  // namespace gzsl::pipeline
