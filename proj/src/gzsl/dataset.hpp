#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gzsl/dense_matrix.hpp"
#include "gzsl/tensor_io.hpp"

namespace gzsl::dataio {

using IndexList = std::vector<std::uint32_t>;

struct Splits {
  IndexList train;
  std::optional<IndexList> val;
  IndexList test_seen;
  IndexList test_unseen;

  friend bool operator==(const Splits&, const Splits&) = default;
};

// Precomputed visual features with one attribute row per class. Class ids are
// 0-based and dense: seen ∪ unseen == {0, ..., C-1}.
struct GzslDataset {
  std::string name;
  numerics::DenseMatrix features;    // N x X
  std::vector<std::uint32_t> labels;  // N
  numerics::DenseMatrix attributes;  // C x A
  std::vector<std::uint32_t> seen_classes;
  std::vector<std::uint32_t> unseen_classes;
  Splits splits;

  std::size_t num_samples() const noexcept { return features.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  std::size_t attribute_dim() const noexcept { return attributes.cols(); }
  std::size_t num_classes() const noexcept { return attributes.rows(); }

  bool is_seen(std::uint32_t cls) const;

  friend bool operator==(const GzslDataset&, const GzslDataset&) = default;
};

struct DatasetCounts {
  std::size_t seen_classes;
  std::size_t unseen_classes;
  std::size_t train;
  std::size_t test_seen;
  std::size_t test_unseen;

  friend bool operator==(const DatasetCounts&, const DatasetCounts&) = default;
};

// Throws ErrorCode::kValidation naming the first violated invariant.
void validate(const GzslDataset& dataset);

GzslDataset load_gzb(const std::filesystem::path& dir);
void write_gzb(const GzslDataset& dataset, const std::filesystem::path& dir,
               bool with_checksums = true);

DatasetCounts summarize(const GzslDataset& dataset);

struct SyntheticSpec {
  std::size_t seen_classes = 8;
  std::size_t unseen_classes = 4;
  std::size_t feature_dim = 32;
  std::size_t attribute_dim = 8;
  std::size_t samples_per_class = 100;
  double test_seen_fraction = 0.2;
  // Standard deviation of the isotropic within-class noise.
  double noise = 0.6;
  std::uint64_t seed = 0;
};

// Gaussian classes whose visual centres are a fixed nonlinear function of
// their attributes, so unseen classes are reachable through the semantics.
GzslDataset make_synthetic(const SyntheticSpec& spec);

// Overlays the keys present in `j`; unknown keys are a format error.
SyntheticSpec synthetic_spec_from_json(const Json& j, SyntheticSpec base = {});

}  // namespace gzsl::dataio
