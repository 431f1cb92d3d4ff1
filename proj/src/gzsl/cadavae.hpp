#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "gzsl/dataset.hpp"
#include "gzsl/dense_matrix.hpp"
#include "gzsl/parameter_set.hpp"
#include "gzsl/rng.hpp"
#include "gzsl/tape.hpp"

namespace gzsl::cadavae {

using numerics::DenseMatrix;
using Json = nlohmann::ordered_json;

struct NetworkSizes {
  std::size_t visual_encoder_hidden = 1560;
  std::size_t semantic_encoder_hidden = 1450;
  std::size_t visual_decoder_hidden = 1560;
  std::size_t semantic_decoder_hidden = 660;
  std::size_t latent_dim = 64;

  friend bool operator==(const NetworkSizes&, const NetworkSizes&) = default;
};

enum class Network { kVisualEncoder, kSemanticEncoder, kVisualDecoder, kSemanticDecoder };

// Two Gaussian encoders into a shared latent space and two decoders back out.
// Every network is Linear -> ReLU -> Linear; encoder outputs are [mu | logvar].
class CadaVaeModel {
 public:
  CadaVaeModel() = default;
  CadaVaeModel(std::size_t feature_dim, std::size_t attribute_dim, const NetworkSizes& sizes,
               std::uint64_t seed);

  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t attribute_dim() const noexcept { return attribute_dim_; }
  std::size_t latent_dim() const noexcept { return sizes_.latent_dim; }
  const NetworkSizes& sizes() const noexcept { return sizes_; }

  numerics::ParameterSet& params() noexcept { return params_; }
  const numerics::ParameterSet& params() const noexcept { return params_; }

  // Index of the first-layer weight of a network; layout is
  // [fc1.weight, fc1.bias, fc2.weight, fc2.bias].
  std::size_t first_param(Network net) const noexcept { return static_cast<std::size_t>(net) * 4; }

 private:
  std::size_t feature_dim_ = 0;
  std::size_t attribute_dim_ = 0;
  NetworkSizes sizes_;
  numerics::ParameterSet params_;
};

// Batch of diagonal Gaussians, one per row.
struct LatentGaussian {
  DenseMatrix mu;
  DenseMatrix logvar;
};

LatentGaussian encode_visual(const CadaVaeModel& model, const DenseMatrix& x);
LatentGaussian encode_semantic(const CadaVaeModel& model, const DenseMatrix& a);
DenseMatrix decode_visual(const CadaVaeModel& model, const DenseMatrix& z);
DenseMatrix decode_semantic(const CadaVaeModel& model, const DenseMatrix& z);

// A recorded loss: the tape can be differentiated with backward().
struct LossGraph {
  numerics::Tape tape;
  numerics::Var loss{0};

  double value() const { return tape.scalar(loss); }
  numerics::Gradients backward() { return tape.backward(loss); }
};

struct EncodedVars {
  numerics::Var mu;
  numerics::Var logvar;
};

// Graph builders shared by the standalone losses and by training.
EncodedVars encode_on_tape(numerics::Tape& tape, const CadaVaeModel& model, Network encoder,
                           numerics::Var input);
numerics::Var decode_on_tape(numerics::Tape& tape, const CadaVaeModel& model, Network decoder,
                             numerics::Var z);

// Sum over both modalities of L1 reconstruction through a sampled latent plus
// beta * KL to N(0, I); batch mean. Draws the visual noise, then the semantic.
numerics::Var vae_term(numerics::Tape& tape, const CadaVaeModel& model, numerics::Var x,
                       numerics::Var a, const EncodedVars& ex, const EncodedVars& ea,
                       numerics::Rng& rng, double beta);
// |x - D_x(mu_a)|_1 + |a - D_a(mu_x)|_1, batch mean.
numerics::Var cross_modal_term(numerics::Tape& tape, const CadaVaeModel& model, numerics::Var x,
                               numerics::Var a, const EncodedVars& ex, const EncodedVars& ea);
// |mu_x - mu_a|_2^2 + |sigma_x - sigma_a|_2^2, batch mean.
numerics::Var dist_align_term(numerics::Tape& tape, const EncodedVars& ex, const EncodedVars& ea);

LossGraph vae_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a,
                   numerics::Rng& rng, double beta);
LossGraph cross_modal_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a);
// Differentiable w.r.t. the four input matrices (see LossGraph::tape.grad).
LossGraph dist_align_loss(const LatentGaussian& visual, const LatentGaussian& semantic);

struct LossWeights {
  double beta = 0.0;
  double gamma_cm = 0.0;
  double gamma_da = 0.0;
};

struct Stage1Terms {
  numerics::Var vae;
  numerics::Var cross;
  numerics::Var dist;
  numerics::Var total;
};

// L_VAE + gamma_cm * L_CM + gamma_da * L_DA over one matched batch.
LossGraph stage1_loss(const CadaVaeModel& model, const DenseMatrix& x, const DenseMatrix& a,
                      numerics::Rng& rng, const LossWeights& weights, Stage1Terms* terms = nullptr);

struct WeightSchedule {
  double rate = 0.0;
  int start_epoch = 0;
  int end_epoch = 0;

  friend bool operator==(const WeightSchedule&, const WeightSchedule&) = default;
};

// rate * clamp(epoch - start, 0, end - start)
double schedule_weight(const WeightSchedule& schedule, int epoch);

struct Stage1Config {
  int epochs = 100;
  std::size_t batch_size = 50;
  double learning_rate = 1.5e-4;
  WeightSchedule gamma_cm{0.044, 21, 75};
  WeightSchedule gamma_da{0.0026, 0, 90};
  WeightSchedule beta{0.0026, 0, 90};
  NetworkSizes sizes;
  std::uint64_t seed = 0;

  friend bool operator==(const Stage1Config&, const Stage1Config&) = default;
};

void validate(const Stage1Config& config);

struct EpochLoss {
  int epoch;
  double vae;
  double cross;
  double dist;
  double total;
  LossWeights weights;
};

struct Stage1Result {
  CadaVaeModel model;
  std::vector<EpochLoss> log;
};

// Trains on the seen-class training split, each feature paired with its
// class attribute row. Throws kTrainingDiverged naming the epoch.
Stage1Result train_stage1(const dataio::GzslDataset& dataset, const Stage1Config& config);

void to_json(Json& j, const WeightSchedule& s);
void from_json(const Json& j, WeightSchedule& s);
void to_json(Json& j, const NetworkSizes& s);
void from_json(const Json& j, NetworkSizes& s);
void to_json(Json& j, const Stage1Config& c);
// Missing keys keep their current values.
void from_json(const Json& j, Stage1Config& c);

void save_checkpoint(const CadaVaeModel& model, const Stage1Config& config,
                     const std::filesystem::path& dir);
struct Checkpoint {
  CadaVaeModel model;
  Stage1Config config;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace gzsl::cadavae
