#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "gzsl/dense_matrix.hpp"
#include "gzsl/error.hpp"
#include "gzsl/parameter_set.hpp"
#include "gzsl/rng.hpp"
#include "gzsl/tape.hpp"

using namespace gzsl;
using namespace gzsl::numerics;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  DenseMatrix m(r, c);
  for (auto& v : m.values()) v = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
  return m;
}

template <typename F>
void expect_error(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "no exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(LinearForward, IdentityWeightPassesInputThrough) {
  const auto out = linear_forward(DenseMatrix::identity(2), DenseMatrix(1, 2),
                                  DenseMatrix::from_rows({{3, 4}}), Activation::kIdentity);
  EXPECT_EQ(out, DenseMatrix::from_rows({{3, 4}}));
}

TEST(LinearForward, ReluClampsNegatives) {
  const auto out = linear_forward(DenseMatrix::identity(2), DenseMatrix(1, 2),
                                  DenseMatrix::from_rows({{-1, 2}}), Activation::kRelu);
  EXPECT_EQ(out, DenseMatrix::from_rows({{0, 2}}));
}

TEST(LinearForward, MatchesScalarLoop) {
  Rng rng(7);
  const auto w = random_matrix(3, 4, rng), b = random_matrix(1, 4, rng), x = random_matrix(5, 3, rng);
  for (auto act : {Activation::kIdentity, Activation::kRelu, Activation::kSigmoid}) {
    const auto out = linear_forward(w, b, x, act);
    ASSERT_EQ(out.rows(), 5u);
    ASSERT_EQ(out.cols(), 4u);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        double s = b(0, j);
        for (std::size_t k = 0; k < 3; ++k) s += double(x(i, k)) * w(k, j);
        if (act == Activation::kRelu) s = std::max(s, 0.0);
        if (act == Activation::kSigmoid) s = 1.0 / (1.0 + std::exp(-s));
        EXPECT_NEAR(out(i, j), s, 1e-6);
      }
  }
}

TEST(LinearForward, ShapeMismatchThrows) {
  expect_error(ErrorCode::kShape, [] {
    linear_forward(DenseMatrix(3, 2), DenseMatrix(1, 2), DenseMatrix(1, 4), Activation::kIdentity);
  });
  expect_error(ErrorCode::kShape, [] {
    linear_forward(DenseMatrix(3, 2), DenseMatrix(1, 3), DenseMatrix(1, 3), Activation::kIdentity);
  });
}

TEST(DenseMatrix, TransposedProductsMatchLoops) {
  Rng rng(3);
  const auto a = random_matrix(4, 3, rng), b = random_matrix(4, 5, rng), c = random_matrix(6, 3, rng);
  const auto tn = matmul_tn(a, b);
  const auto nt = matmul_nt(a, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += double(a(k, i)) * b(k, j);
      EXPECT_NEAR(tn(i, j), s, 1e-5);
    }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += double(a(i, k)) * c(j, k);
      EXPECT_NEAR(nt(i, j), s, 1e-5);
    }
  expect_error(ErrorCode::kShape, [&] { matmul(a, a); });
}

TEST(DenseMatrix, RowHelpers) {
  const auto m = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  const std::uint32_t idx[] = {2, 0};
  EXPECT_EQ(select_rows(m, idx), DenseMatrix::from_rows({{7, 8, 9}, {1, 2, 3}}));
  EXPECT_EQ(slice_cols(m, 1, 2), DenseMatrix::from_rows({{2, 3}, {5, 6}, {8, 9}}));
  const DenseMatrix parts[] = {slice_cols(m, 0, 1), slice_cols(m, 1, 2)};
  expect_error(ErrorCode::kShape, [&] { vstack(parts); });
  const std::uint32_t bad[] = {3};
  expect_error(ErrorCode::kShape, [&] { select_rows(m, bad); });
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs = differs || x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, NormalMoments) {
  Rng rng(1);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  // Standard errors are about 0.0022, 0.0032 and 0.022.
  EXPECT_NEAR(s1 / n, 0.0, 0.012);
  EXPECT_NEAR(s2 / n, 1.0, 0.016);
  EXPECT_NEAR(s4 / n, 3.0, 0.11);
}

TEST(Rng, UniformAndBelow) {
  Rng rng(9);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hits[rng.below(7)];
  }
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(5);
  std::vector<std::uint32_t> v(50);
  std::iota(v.begin(), v.end(), 0u);
  rng.shuffle(v);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Rng, DerivedSeedsDiffer) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Rng, GaussianSampleMoments) {
  Rng rng(11);
  const std::size_t n = 40000;
  DenseMatrix mu(n, 2), lv(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    mu(i, 0) = 1.5f;
    mu(i, 1) = -2.0f;
    lv(i, 0) = 0.0f;
    lv(i, 1) = static_cast<float>(std::log(0.25));
  }
  const auto z = gaussian_sample(mu, lv, rng);
  double m[2] = {0, 0}, v[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) m[j] += z(i, j);
  for (int j = 0; j < 2; ++j) m[j] /= n;
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) v[j] += (z(i, j) - m[j]) * (z(i, j) - m[j]);
  EXPECT_NEAR(m[0], 1.5, 0.03);
  EXPECT_NEAR(m[1], -2.0, 0.015);
  EXPECT_NEAR(v[0] / n, 1.0, 0.03);
  EXPECT_NEAR(v[1] / n, 0.25, 0.008);
}

TEST(Rng, FanInInitBound) {
  Rng rng(2);
  const auto w = uniform_fan_in(30, 20, 16, rng);
  for (float v : w.values()) EXPECT_LE(std::fabs(v), 0.25f);
}

// Scalar Adam, written out for one coordinate.
TEST(Adam, MatchesScalarOracle) {
  ParameterSet ps;
  ps.add("w", DenseMatrix::from_rows({{0.5f, -1.0f}}));
  const AdamOptions opt{0.01, 0.9, 0.999, 1e-8};
  double w[2] = {0.5, -1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 25; ++t) {
    const double g[2] = {std::sin(t * 0.7), 0.3 * t - 2.0};
    adam_step(ps, {DenseMatrix::from_rows({{float(g[0]), float(g[1])}})}, opt);
    for (int k = 0; k < 2; ++k) {
      const double gk = float(g[k]);
      m[k] = 0.9 * m[k] + 0.1 * gk;
      v[k] = 0.999 * v[k] + 0.001 * gk * gk;
      const double mh = m[k] / (1 - std::pow(0.9, t)), vh = v[k] / (1 - std::pow(0.999, t));
      w[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(ps[0].value(0, k), w[k], 1e-5) << "step " << t;
    }
  }
  EXPECT_EQ(ps.step(), 25u);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  ParameterSet ps;
  ps.add("a", DenseMatrix::from_rows({{1.0f}}));
  ps.add("b", DenseMatrix::from_rows({{2.0f}}));
  adam_step(ps, {DenseMatrix::from_rows({{0.1f}}), DenseMatrix::from_rows({{0.2f}})}, {});
  const auto before_a = ps[0].value, before_m = ps[0].first_moment;
  expect_error(ErrorCode::kTrainingDiverged, [&] {
    adam_step(ps, {DenseMatrix::from_rows({{0.1f}}), DenseMatrix::from_rows({{NAN}})}, {});
  });
  EXPECT_EQ(ps[0].value, before_a);
  EXPECT_EQ(ps[0].first_moment, before_m);
  EXPECT_EQ(ps.step(), 1u);
}

TEST(Adam, RejectsBadInput) {
  ParameterSet ps;
  ps.add("a", DenseMatrix(2, 2));
  expect_error(ErrorCode::kShape, [&] { adam_step(ps, {DenseMatrix(2, 3)}, {}); });
  expect_error(ErrorCode::kShape, [&] { adam_step(ps, {}, {}); });
  expect_error(ErrorCode::kDomain, [&] { adam_step(ps, {DenseMatrix(2, 2)}, {0.0}); });
}

TEST(ParameterSet, MomentsMatchShapes) {
  Rng rng(0);
  ParameterSet ps;
  const auto w = ps.add_linear("fc", 3, 5, rng);
  EXPECT_EQ(ps.index_of("fc.weight"), w);
  EXPECT_EQ(ps.index_of("fc.bias"), w + 1);
  for (const auto& p : ps) {
    EXPECT_EQ(p.first_moment.rows(), p.value.rows());
    EXPECT_EQ(p.second_moment.cols(), p.value.cols());
  }
  expect_error(ErrorCode::kUsage, [&] { ps.index_of("nope"); });
}

namespace {

double relative_error(const DenseMatrix& analytic, const std::vector<double>& numeric) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    diff += std::pow(analytic.values()[i] - numeric[i], 2);
    na += std::pow(analytic.values()[i], 2);
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

std::vector<double> as_double(const DenseMatrix& m) {
  return {m.values().begin(), m.values().end()};
}

// Central differences of f around x.
std::vector<double> numeric_grad(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Tape, LinearSigmoidSquaredDistanceGradients) {
  Rng rng(21);
  const auto x = random_matrix(4, 3, rng), w = random_matrix(3, 2, rng), b = random_matrix(1, 2, rng);
  const auto t = random_matrix(4, 2, rng);
  Tape tape;
  const Var vx = tape.input(x, true), vw = tape.input(w, true), vb = tape.input(b, true);
  const Var y = tape.sigmoid(tape.linear(vx, vw, vb));
  const Var loss = tape.scale(tape.squared_distance(y, tape.input(t)), 1.7);
  tape.backward(loss);

  const auto f = [&](const std::vector<double>& wv) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        double z = b(0, j);
        for (std::size_t k = 0; k < 3; ++k) z += double(x(i, k)) * wv[k * 2 + j];
        const double d = 1 / (1 + std::exp(-z)) - t(i, j);
        s += d * d;
      }
    return 1.7 * s / 4;
  };
  EXPECT_NEAR(tape.scalar(loss), f(as_double(w)), 1e-5);
  EXPECT_LT(relative_error(tape.grad(vw), numeric_grad(f, as_double(w))), 1e-4);
}

TEST(Tape, ReluL1SliceGradients) {
  Rng rng(22);
  const auto x = random_matrix(3, 6, rng);
  const auto t = random_matrix(3, 2, rng);
  Tape tape;
  const Var vx = tape.input(x, true);
  const Var loss = tape.l1_distance(tape.relu(tape.slice_cols(vx, 2, 2)), tape.input(t));
  tape.backward(loss);
  const auto f = [&](const std::vector<double>& xv) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j) s += std::fabs(std::max(xv[i * 6 + 2 + j], 0.0) - t(i, j));
    return s / 3;
  };
  EXPECT_LT(relative_error(tape.grad(vx), numeric_grad(f, as_double(x))), 1e-4);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(tape.grad(vx)(i, 0), 0.0f);
}

TEST(Tape, KlExpHalfAndReparamGradients) {
  Rng rng(23);
  const auto mu = random_matrix(3, 2, rng), lv = random_matrix(3, 2, rng);
  Rng sampler(99), replay(99);
  const auto eps = standard_normal(3, 2, replay);
  Tape tape;
  const Var vm = tape.input(mu, true), vl = tape.input(lv, true);
  const Var z = tape.reparam_sample(vm, vl, sampler);
  const Var loss = tape.add(tape.add(tape.gaussian_kl(vm, vl),
                                     tape.squared_distance(z, tape.input(DenseMatrix(3, 2)))),
                            tape.squared_distance(tape.exp_half(vl), tape.input(DenseMatrix(3, 2))));
  tape.backward(loss);
  const auto f = [&](const std::vector<double>& m, const std::vector<double>& l) {
    double s = 0;
    for (std::size_t i = 0; i < 6; ++i) {
      s += 0.5 * (std::exp(l[i]) + m[i] * m[i] - 1 - l[i]);
      const double zi = m[i] + std::exp(0.5 * l[i]) * eps.values()[i];
      s += zi * zi + std::exp(l[i]);
    }
    return s / 3;
  };
  EXPECT_NEAR(tape.scalar(loss), f(as_double(mu), as_double(lv)), 1e-5);
  const auto lvd = as_double(lv), mud = as_double(mu);
  EXPECT_LT(relative_error(tape.grad(vm),
                           numeric_grad([&](const auto& m) { return f(m, lvd); }, mud)),
            1e-4);
  EXPECT_LT(relative_error(tape.grad(vl),
                           numeric_grad([&](const auto& l) { return f(mud, l); }, lvd)),
            1e-4);
}

TEST(Tape, SoftmaxCrossEntropyGradients) {
  Rng rng(24);
  const auto logits = random_matrix(5, 4, rng, 3.0);
  const std::vector<std::uint32_t> labels = {0, 3, 1, 1, 2};
  Tape tape;
  const Var v = tape.input(logits, true);
  const Var loss = tape.softmax_cross_entropy(v, labels);
  tape.backward(loss);
  const auto f = [&](const std::vector<double>& l) {
    double s = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      double z = 0;
      for (std::size_t j = 0; j < 4; ++j) z += std::exp(l[i * 4 + j]);
      s += std::log(z) - l[i * 4 + labels[i]];
    }
    return s / 5;
  };
  EXPECT_NEAR(tape.scalar(loss), f(as_double(logits)), 1e-5);
  EXPECT_LT(relative_error(tape.grad(v), numeric_grad(f, as_double(logits))), 1e-4);
}

TEST(Tape, ParameterGradientsAreReturnedInOrder) {
  Rng rng(25);
  ParameterSet ps;
  ps.add_linear("fc", 3, 2, rng);
  ps.add("unused", DenseMatrix(2, 2));
  Tape tape(&ps);
  const Var out = tape.linear(tape.input(random_matrix(4, 3, rng)), tape.parameter(0), tape.parameter(1));
  const auto grads = tape.backward(tape.squared_distance(out, tape.input(DenseMatrix(4, 2))));
  ASSERT_EQ(grads.size(), 3u);
  EXPECT_EQ(grads[0].rows(), 3u);
  EXPECT_EQ(grads[1].cols(), 2u);
  EXPECT_EQ(grads[2], DenseMatrix(2, 2));
}

TEST(Tape, UnsupportedNodeIsRejected) {
  Tape tape;
  const Var x = tape.input(DenseMatrix(1, 1, 2.0f), true);
  const Var odd = tape.record(static_cast<NodeKind>(200), {x.id}, DenseMatrix(1, 1, 4.0f));
  expect_error(ErrorCode::kUnsupported, [&] { tape.backward(odd); });
}

TEST(Tape, BackwardNeedsScalarLoss) {
  Tape tape;
  const Var x = tape.input(DenseMatrix(2, 2), true);
  expect_error(ErrorCode::kShape, [&] { tape.backward(x); });
}
