#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "gzsl/dataset.hpp"
#include "gzsl/error.hpp"
#include "gzsl/latentgen.hpp"

using namespace gzsl;
using namespace gzsl::latentgen;

namespace {

// 2 seen + 1 unseen classes.
struct Fixture {
  dataio::GzslDataset data;
  cadavae::CadaVaeModel model;

  Fixture() {
    dataio::SyntheticSpec spec;
    spec.seen_classes = 2;
    spec.unseen_classes = 1;
    spec.feature_dim = 5;
    spec.attribute_dim = 3;
    spec.samples_per_class = 6;
    data = dataio::make_synthetic(spec);
    model = cadavae::CadaVaeModel(5, 3, {6, 6, 6, 6, 4}, 12);
  }
};

std::map<std::uint32_t, std::size_t> histogram(const std::vector<std::uint32_t>& labels) {
  std::map<std::uint32_t, std::size_t> h;
  for (auto l : labels) ++h[l];
  return h;
}

}  // namespace

TEST(Latentgen, CountsAndLabelHistogram) {
  Fixture f;
  const auto set = build_latent_trainset(f.model, f.data, {3, 5, 1});
  EXPECT_EQ(set.space, Space::kLatent);
  EXPECT_EQ(set.embeddings.rows(), 11u);
  EXPECT_EQ(set.embeddings.cols(), 4u);
  EXPECT_EQ(histogram(set.labels), (std::map<std::uint32_t, std::size_t>{{0, 3}, {1, 3}, {2, 5}}));
  EXPECT_EQ(set.labels.front(), 0u);
  EXPECT_EQ(set.labels.back(), 2u);
}

TEST(Latentgen, OversamplingKeepsExactCounts) {
  Fixture f;
  // Each seen class has only 5 training rows, so 23 needs several passes.
  const auto set = build_latent_trainset(f.model, f.data, {23, 2, 1});
  EXPECT_EQ(histogram(set.labels), (std::map<std::uint32_t, std::size_t>{{0, 23}, {1, 23}, {2, 2}}));
}

TEST(Latentgen, SameSeedSameSet) {
  Fixture f;
  const auto a = build_latent_trainset(f.model, f.data, {4, 4, 9});
  const auto b = build_latent_trainset(f.model, f.data, {4, 4, 9});
  const auto c = build_latent_trainset(f.model, f.data, {4, 4, 10});
  EXPECT_EQ(a.embeddings, b.embeddings);
  EXPECT_NE(a.embeddings, c.embeddings);
}

TEST(Latentgen, ClassStreamsAreIndependentOfOtherCounts) {
  Fixture f;
  const auto a = build_latent_trainset(f.model, f.data, {4, 3, 9});
  const auto b = build_latent_trainset(f.model, f.data, {7, 3, 9});
  // The unseen block is the last 3 rows of both sets.
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(a.embeddings.row(a.embeddings.rows() - 1 - r)[0],
              b.embeddings.row(b.embeddings.rows() - 1 - r)[0]);
  }
}

TEST(Latentgen, ZeroVarianceGivesEncoderMean) {
  Fixture f;
  // Drive the semantic encoder's logvar outputs to a huge negative constant.
  auto& params = f.model.params();
  const std::size_t fc2 = f.model.first_param(cadavae::Network::kSemanticEncoder) + 2;
  const std::size_t z = f.model.latent_dim();
  for (std::size_t r = 0; r < params[fc2].value.rows(); ++r)
    for (std::size_t c = z; c < 2 * z; ++c) params[fc2].value(r, c) = 0.0f;
  for (std::size_t c = z; c < 2 * z; ++c) params[fc2 + 1].value(0, c) = -1000.0f;

  const auto set = build_latent_trainset(f.model, f.data, {1, 6, 3});
  const std::uint32_t cls[] = {2};
  const auto mu = cadavae::encode_semantic(f.model, numerics::select_rows(f.data.attributes, cls)).mu;
  for (std::size_t r = 2; r < 8; ++r) {
    for (std::size_t c = 0; c < z; ++c) EXPECT_EQ(set.embeddings(r, c), mu(0, c));
  }
}

TEST(Latentgen, SeenClassWithoutSamplesNamesTheClass) {
  Fixture f;
  std::erase_if(f.data.splits.train, [&](std::uint32_t i) { return f.data.labels[i] == 1; });
  try {
    build_latent_trainset(f.model, f.data, {3, 3, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeneration);
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos) << e.what();
  }
}

TEST(Latentgen, DecodedSetsAreRowAligned) {
  Fixture f;
  auto z = build_latent_trainset(f.model, f.data, {3, 2, 5});
  // Duplicate a row to check the decode is a deterministic row map.
  for (std::size_t c = 0; c < z.embeddings.cols(); ++c) z.embeddings(1, c) = z.embeddings(0, c);
  const auto d = decode_trainsets(f.model, z);
  EXPECT_EQ(d.visual.labels, z.labels);
  EXPECT_EQ(d.semantic.labels, z.labels);
  EXPECT_EQ(d.visual.space, Space::kReconVisual);
  EXPECT_EQ(d.semantic.space, Space::kReconSemantic);
  EXPECT_EQ(d.visual.embeddings.cols(), 5u);
  EXPECT_EQ(d.semantic.embeddings.cols(), 3u);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(d.visual.embeddings(0, c), d.visual.embeddings(1, c));
  EXPECT_THROW(decode_trainsets(f.model, d.visual), Error);
}

TEST(Latentgen, StratifiedSplitIsBalancedAndDisjoint) {
  std::vector<std::uint32_t> labels;
  for (std::uint32_t c = 0; c < 4; ++c) labels.insert(labels.end(), 20 + c, c);
  labels.push_back(9);  // singleton class stays in train
  const auto s = stratified_split(labels, 0.1, 5);
  EXPECT_EQ(s.train.size() + s.holdout.size(), labels.size());
  std::map<std::uint32_t, std::size_t> held;
  for (auto r : s.holdout) ++held[labels[r]];
  EXPECT_EQ(held[0], 2u);
  EXPECT_EQ(held[3], 2u);
  EXPECT_EQ(held.count(9), 0u);
  std::vector<std::uint32_t> all = s.train;
  all.insert(all.end(), s.holdout.begin(), s.holdout.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(stratified_split(labels, 0.1, 5).holdout, s.holdout);
}

TEST(Latentgen, SaveLoadRoundTrip) {
  Fixture f;
  const auto z = build_latent_trainset(f.model, f.data, {3, 2, 5});
  const auto d = decode_trainsets(f.model, z);
  const auto split = stratified_split(z.labels, 0.34, 1);
  const auto dir = std::filesystem::temp_directory_path() / "gzsl_sets_test";
  std::filesystem::remove_all(dir);
  const LabeledEmbeddingSet sets[] = {z, d.visual, d.semantic};
  save_sets(dir, sets, split);
  const auto back = load_sets(dir);
  ASSERT_EQ(back.sets.size(), 3u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(back.sets[k].space, sets[k].space);
    EXPECT_EQ(back.sets[k].embeddings, sets[k].embeddings);
    EXPECT_EQ(back.sets[k].labels, sets[k].labels);
  }
  EXPECT_EQ(back.split.holdout, split.holdout);
  std::filesystem::remove_all(dir);
}
