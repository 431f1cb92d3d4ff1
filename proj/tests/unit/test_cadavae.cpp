#include <gtest/gtest.h>

#include <filesystem>

#include "../support/reference_model.hpp"
#include "gzsl/cadavae.hpp"
#include "gzsl/dataset.hpp"
#include "gzsl/error.hpp"

using namespace gzsl;
using namespace gzsl::cadavae;
using gzsl::oracle::LossKind;

TEST(CadaVae, LossValuesMatchReference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto in = oracle::random_instance(seed);
    for (auto kind : {LossKind::kVae, LossKind::kCross, LossKind::kAlign, LossKind::kComposite}) {
      const auto r = oracle::check_gradients(kind, in);
      EXPECT_LT(r.value_gap, 1e-5) << "seed " << seed << " kind " << int(kind) << " loss " << r.value;
    }
  }
}

TEST(CadaVae, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto in = oracle::random_instance(seed);
    for (auto kind : {LossKind::kVae, LossKind::kCross, LossKind::kAlign, LossKind::kComposite}) {
      EXPECT_LT(oracle::check_gradients(kind, in).max_relative_error, 1e-3)
          << "seed " << seed << " kind " << int(kind);
    }
  }
}

TEST(CadaVae, IdenticalGaussiansHaveZeroAlignment) {
  LatentGaussian g{numerics::DenseMatrix::from_rows({{0.3f, -1.0f}, {2.0f, 0.5f}}),
                   numerics::DenseMatrix::from_rows({{0.1f, 0.2f}, {-0.4f, 1.0f}})};
  EXPECT_EQ(dist_align_loss(g, g).value(), 0.0);
}

TEST(CadaVae, AlignmentScalarOracle) {
  // Means differ by (1, 2); sigmas are exp(0) = 1 and exp(1) = e.
  LatentGaussian v{numerics::DenseMatrix::from_rows({{1.0f, 2.0f}}),
                   numerics::DenseMatrix::from_rows({{0.0f, 0.0f}})};
  LatentGaussian s{numerics::DenseMatrix::from_rows({{0.0f, 0.0f}}),
                   numerics::DenseMatrix::from_rows({{2.0f, 0.0f}})};
  auto g = dist_align_loss(v, s);
  const double e = std::exp(1.0);
  EXPECT_NEAR(g.value(), 5.0 + (1 - e) * (1 - e), 1e-5);
  g.backward();
  // d/dlogvar_s of (1 - exp(lv/2))^2 at lv = 2 is -(1 - e) e.
  EXPECT_NEAR(g.tape.grad(numerics::Var{3})(0, 0), -(1 - e) * e, 1e-5);
  EXPECT_NEAR(g.tape.grad(numerics::Var{0})(0, 1), 4.0, 1e-6);
}

TEST(CadaVae, RejectsMismatchedBatches) {
  CadaVaeModel model(4, 3, {4, 4, 4, 4, 2}, 1);
  numerics::Rng rng(0);
  try {
    vae_loss(model, numerics::DenseMatrix(2, 4), numerics::DenseMatrix(3, 3), rng, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
  try {
    cross_modal_loss(model, numerics::DenseMatrix(2, 5), numerics::DenseMatrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(CadaVae, DefaultScheduleValues) {
  const Stage1Config c;
  EXPECT_EQ(schedule_weight(c.gamma_cm, 0), 0.0);
  EXPECT_EQ(schedule_weight(c.gamma_cm, 21), 0.0);
  EXPECT_NEAR(schedule_weight(c.gamma_cm, 22), 0.044, 1e-12);
  EXPECT_NEAR(schedule_weight(c.gamma_cm, 75), 0.044 * 54, 1e-12);
  EXPECT_NEAR(schedule_weight(c.gamma_cm, 99), 0.044 * 54, 1e-12);
  EXPECT_NEAR(schedule_weight(c.gamma_da, 1), 0.0026, 1e-12);
  EXPECT_NEAR(schedule_weight(c.gamma_da, 90), 0.0026 * 90, 1e-12);
  EXPECT_NEAR(schedule_weight(c.gamma_da, 95), 0.0026 * 90, 1e-12);
  EXPECT_EQ(c.sizes, (NetworkSizes{1560, 1450, 1560, 660, 64}));
  EXPECT_EQ(c.epochs, 100);
}

TEST(CadaVae, ScheduleIsMonotone) {
  const WeightSchedule s{0.5, 3, 9};
  for (int e = 0; e < 20; ++e) EXPECT_LE(schedule_weight(s, e), schedule_weight(s, e + 1));
}

namespace {

dataio::GzslDataset small_dataset(std::uint64_t seed) {
  dataio::SyntheticSpec spec;
  spec.seen_classes = 4;
  spec.unseen_classes = 2;
  spec.feature_dim = 8;
  spec.attribute_dim = 4;
  spec.samples_per_class = 20;
  spec.seed = seed;
  return dataio::make_synthetic(spec);
}

Stage1Config small_config() {
  Stage1Config c;
  c.epochs = 15;
  c.batch_size = 16;
  c.learning_rate = 1e-3;
  c.sizes = {16, 16, 16, 16, 4};
  c.gamma_cm = {0.05, 2, 10};
  c.gamma_da = {0.05, 0, 10};
  c.beta = {0.01, 0, 10};
  c.seed = 3;
  return c;
}

}  // namespace

TEST(CadaVae, TrainingReducesReconstructionLoss) {
  const auto d = small_dataset(1);
  auto c = small_config();
  c.gamma_cm.rate = c.gamma_da.rate = c.beta.rate = 0.0;
  c.epochs = 40;
  const auto r = train_stage1(d, c);
  ASSERT_EQ(r.log.size(), 40u);
  EXPECT_LT(r.log.back().vae, 0.8 * r.log.front().vae);
  for (const auto& e : r.log) EXPECT_TRUE(std::isfinite(e.total));
}

TEST(CadaVae, TrainingIsDeterministic) {
  const auto d = small_dataset(2);
  const auto a = train_stage1(d, small_config());
  const auto b = train_stage1(d, small_config());
  for (std::size_t i = 0; i < a.model.params().size(); ++i) {
    EXPECT_EQ(a.model.params()[i].value, b.model.params()[i].value);
  }
  EXPECT_EQ(a.log.back().total, b.log.back().total);
}

TEST(CadaVae, DivergenceNamesTheEpoch) {
  const auto d = small_dataset(3);
  auto c = small_config();
  c.learning_rate = 1e30;
  try {
    train_stage1(d, c);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingDiverged);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos) << e.what();
  }
}

TEST(CadaVae, CheckpointRoundTrip) {
  const auto d = small_dataset(4);
  auto c = small_config();
  c.epochs = 2;
  const auto r = train_stage1(d, c);
  const auto dir = std::filesystem::temp_directory_path() / "gzsl_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(r.model, c, dir);
  const auto back = load_checkpoint(dir);
  EXPECT_EQ(back.config, c);
  ASSERT_EQ(back.model.params().size(), r.model.params().size());
  for (std::size_t i = 0; i < r.model.params().size(); ++i) {
    EXPECT_EQ(back.model.params()[i].name, r.model.params()[i].name);
    EXPECT_EQ(back.model.params()[i].value, r.model.params()[i].value);
  }
  std::filesystem::remove_all(dir);
}

TEST(CadaVae, ConfigJsonRoundTrip) {
  const auto c = small_config();
  Json j = c;
  Stage1Config back;
  from_json(j, back);
  EXPECT_EQ(back, c);
  Stage1Config partial;
  from_json(Json{{"epochs", 7}}, partial);
  EXPECT_EQ(partial.epochs, 7);
  EXPECT_EQ(partial.batch_size, 50u);
}

TEST(CadaVae, RejectsBadConfig) {
  const auto d = small_dataset(5);
  auto c = small_config();
  c.batch_size = 1;
  EXPECT_THROW(train_stage1(d, c), Error);
  c = small_config();
  c.gamma_cm = {0.1, 10, 5};
  EXPECT_THROW(train_stage1(d, c), Error);
}
