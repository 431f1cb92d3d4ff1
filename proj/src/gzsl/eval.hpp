#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gzsl/dataset.hpp"
#include "gzsl/ensemble.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::eval {

using ensemble::ScoreMatrix;

// Mean over the classes of class_set that have samples of
// (correct-in-class / total-in-class), as a percentage.
double per_class_top1(std::span<const std::uint32_t> predictions,
                      std::span<const std::uint32_t> labels,
                      std::span<const std::uint32_t> class_set);

// Per-class accuracy (percent) for every class of class_set with samples.
std::map<std::uint32_t, double> per_class_accuracy(std::span<const std::uint32_t> predictions,
                                                   std::span<const std::uint32_t> labels,
                                                   std::span<const std::uint32_t> class_set);

double harmonic_mean(double seen, double unseen);

struct AusucCurve {
  // Sorted ascending; the first and last entries are -inf and +inf.
  std::vector<double> bias;
  std::vector<double> unseen;  // fraction in [0, 1]
  std::vector<double> seen;    // fraction in [0, 1]
  double area = 0.0;           // fraction in [0, 1]
};

// Sweeps a bias subtracted from every seen-class score. The sweep visits the
// n_bias grid over [-g, g] (g = largest |best seen - best unseen| over
// samples) together with one point between every pair of adjacent per-sample
// decision thresholds, so the trapezoidal area is that of the exact curve.
AusucCurve ausuc(const ScoreMatrix& scores, std::span<const std::uint32_t> labels,
                 std::span<const std::uint32_t> seen_classes,
                 std::span<const std::uint32_t> unseen_classes, std::size_t n_bias = 200);

enum class Metric { kL2, kL1, kCosine };
Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric metric);

// Pairwise distances between rows.
ScoreMatrix class_distance_matrix(const numerics::DenseMatrix& per_class, Metric metric = Metric::kL2);

void write_distance_csv(const std::filesystem::path& path, const ScoreMatrix& matrix,
                        std::span<const std::uint32_t> class_ids,
                        std::span<const std::uint32_t> seen_classes);

enum class Mode { kEnsemble, kTau1, kLatentOnly, kReconVisualOnly, kReconSemanticOnly };
Mode parse_mode(std::string_view name);
std::string_view mode_name(Mode mode);
// Table label used in printed results ("MCADA-VAE", "z-CADA-VAE", ...).
std::string_view mode_label(Mode mode);

// Maps an ablation mode onto ensemble weights. The base config supplies the
// lambdas for the two ensemble modes.
ensemble::EnsembleConfig config_for_mode(Mode mode, const ensemble::EnsembleConfig& base);

struct EvalOptions {
  bool with_ausuc = false;
  std::size_t n_bias = 200;
};

struct EvalReport {
  ensemble::EnsembleConfig config;
  double temperatures[3] = {1.0, 1.0, 1.0};
  std::map<std::uint32_t, double> per_class;
  double seen = 0.0;
  double unseen = 0.0;
  double harmonic = 0.0;
  std::optional<AusucCurve> ausuc;
  std::uint64_t seed = 0;
};

EvalReport evaluate(const cadavae::CadaVaeModel& model,
                    const ensemble::ClassifierTriple& classifiers,
                    const ensemble::EnsembleConfig& config, const dataio::GzslDataset& dataset,
                    const EvalOptions& options = {});

// Stable key order; infinities in the AUSUC bias list are written as strings.
dataio::Json to_json(const EvalReport& report);

}  // namespace gzsl::eval
