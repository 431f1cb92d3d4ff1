#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "gzsl/cadavae.hpp"
#include "gzsl/dataset.hpp"

namespace gzsl::latentgen {

enum class Space { kLatent, kReconVisual, kReconSemantic };

std::string_view space_name(Space space);  // "z", "xr", "ar"
Space parse_space(std::string_view name);

struct LabeledEmbeddingSet {
  Space space = Space::kLatent;
  numerics::DenseMatrix embeddings;  // M x d
  std::vector<std::uint32_t> labels;  // M
};

struct GenConfig {
  std::size_t seen_per_class = 200;
  std::size_t unseen_per_class = 400;
  std::uint64_t seed = 0;
};

// Rows are grouped by class: seen classes in ascending id order, then unseen.
// Each class draws from its own stream derived from (seed, class id).
LabeledEmbeddingSet build_latent_trainset(const cadavae::CadaVaeModel& model,
                                          const dataio::GzslDataset& dataset,
                                          const GenConfig& config);

struct DecodedSets {
  LabeledEmbeddingSet visual;    // D_x(z)
  LabeledEmbeddingSet semantic;  // D_a(z)
};

DecodedSets decode_trainsets(const cadavae::CadaVaeModel& model,
                             const LabeledEmbeddingSet& latent_set);

// Row subset, keeping the space tag.
LabeledEmbeddingSet subset(const LabeledEmbeddingSet& set, std::span<const std::uint32_t> rows);

// Stratified split: within every class a fixed fraction (rounded, at least one
// row when the class has two or more) goes to the holdout.
struct StratifiedSplit {
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> holdout;
};
StratifiedSplit stratified_split(std::span<const std::uint32_t> labels, double holdout_fraction,
                                 std::uint64_t seed);

// GZB-style tensor dump for inspection and for the pipeline's later stages.
void save_sets(const std::filesystem::path& dir, std::span<const LabeledEmbeddingSet> sets,
               const StratifiedSplit& split);
struct SavedSets {
  std::vector<LabeledEmbeddingSet> sets;
  StratifiedSplit split;
};
SavedSets load_sets(const std::filesystem::path& dir);

}  // namespace gzsl::latentgen
