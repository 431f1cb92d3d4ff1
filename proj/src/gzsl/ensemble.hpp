#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gzsl/cadavae.hpp"
#include "gzsl/latentgen.hpp"

namespace gzsl::ensemble {

using latentgen::LabeledEmbeddingSet;
using latentgen::Space;
using numerics::DenseMatrix;

// Row-major double matrix of per-class scores (probabilities or logits).
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
};

// Single linear layer + softmax over the full class universe, with a
// post-hoc temperature.
struct CalibratedLinearClassifier {
  Space space = Space::kLatent;
  DenseMatrix weight;  // d x C
  DenseMatrix bias;    // 1 x C
  double temperature = 1.0;

  std::size_t input_dim() const noexcept { return weight.rows(); }
  std::size_t num_classes() const noexcept { return weight.cols(); }

  ScoreMatrix logits(const DenseMatrix& embeddings) const;
  // Temperature-scaled softmax; use_temperature=false evaluates at tau = 1.
  ScoreMatrix probabilities(const DenseMatrix& embeddings, bool use_temperature = true) const;
};

struct ClassifierConfig {
  int epochs = 30;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

CalibratedLinearClassifier train_softmax_classifier(const LabeledEmbeddingSet& set,
                                                    std::size_t num_classes,
                                                    const ClassifierConfig& config);

// exp(l/tau) / sum exp(l/tau), max-subtracted.
std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau);

// Mean negative log-likelihood of the labels under softmax(logits / tau).
double mean_nll(const ScoreMatrix& logits, std::span<const std::uint32_t> labels, double tau);

struct CalibrationOptions {
  double min_temperature = 0.05;
  double max_temperature = 20.0;
  int iterations = 60;
};

// Golden-section search over log tau. The result never has higher holdout
// NLL than tau = 1. Stores the temperature in the classifier and returns it.
double calibrate_temperature(CalibratedLinearClassifier& classifier,
                             const LabeledEmbeddingSet& holdout,
                             const CalibrationOptions& options = {});

struct EnsembleConfig {
  double lambda_x = 1.0;
  double lambda_a = 1.0;
  bool renormalize = true;
  bool use_temperature = true;
  // Weight of the latent-space term. The full ensemble uses one; single-space
  // ablations set it to zero.
  double latent_weight = 1.0;
};

struct ClassifierTriple {
  std::optional<CalibratedLinearClassifier> latent;
  std::optional<CalibratedLinearClassifier> recon_visual;
  std::optional<CalibratedLinearClassifier> recon_semantic;

  const CalibratedLinearClassifier& get(Space space) const;
};

struct TestEmbeddings {
  DenseMatrix latent;          // mu of E_x(x)
  DenseMatrix recon_visual;    // D_x(mu)
  DenseMatrix recon_semantic;  // D_a(mu)
};

TestEmbeddings embed_for_test(const cadavae::CadaVaeModel& model, const DenseMatrix& features);

// w_z p_z + lambda_x p_xr + lambda_a p_ar, optionally divided by the weight sum.
ScoreMatrix ensemble_scores(const DenseMatrix& features, const cadavae::CadaVaeModel& model,
                            const ClassifierTriple& classifiers, const EnsembleConfig& config);
std::vector<double> ensemble_predict(std::span<const float> feature,
                                     const cadavae::CadaVaeModel& model,
                                     const ClassifierTriple& classifiers,
                                     const EnsembleConfig& config);

std::vector<std::uint32_t> argmax_rows(const ScoreMatrix& scores);

void save_classifier(const CalibratedLinearClassifier& classifier,
                     const std::filesystem::path& dir);
CalibratedLinearClassifier load_classifier(const std::filesystem::path& dir);

}  // namespace gzsl::ensemble
