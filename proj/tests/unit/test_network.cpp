#include <gtest/gtest.h>

#include <cmath>

#include "oracle.hpp"
#include "pho/errors.hpp"
#include "pho/network.hpp"
#include "test_util.hpp"

using namespace pho;

namespace {

EncoderShape small_shape() { return EncoderShape{5, 6, 7, 4, 3}; }

// Layer-by-layer forward pass written out with scalar loops.
std::vector<double> oracle_embedding(const TwoStreamEncoder& e, const Vector& x, Modality m, bool normalize) {
  const Dense& stem = m == Modality::kVisible ? e.visible_stem : e.infrared_stem;
  auto layer = [](const Dense& d, const std::vector<double>& in, bool act) {
    std::vector<double> out(static_cast<std::size_t>(d.w.rows()));
    for (Eigen::Index i = 0; i < d.w.rows(); ++i) {
      double s = d.b(i, 0);
      for (Eigen::Index j = 0; j < d.w.cols(); ++j) s += d.w(i, j) * in[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = act ? std::tanh(s) : s;
    }
    return out;
  };
  std::vector<double> in(x.data(), x.data() + x.size());
  auto h = layer(e.trunk_out, layer(e.trunk_hidden, layer(stem, in, true), true), false);
  if (normalize) {
    double s = 0;
    for (double v : h) s += v * v;
    for (double& v : h) v /= std::sqrt(s + kEmbedNormSmoothing);
  }
  return h;
}

}  // namespace

TEST(Forward, ZeroWeightsGiveConstantEmbedding) {
  const auto enc = TwoStreamEncoder::zeros(small_shape());
  Rng rng(1);
  const FeatureBatch b(rng.normal_matrix(4, 5), {Modality::kVisible, Modality::kInfrared, Modality::kVisible, Modality::kInfrared}, {0, 1, 2, 0});
  const auto c = forward(enc, b, false);
  EXPECT_TRUE((c.embedding.array() == 0.0).all());
  EXPECT_TRUE((c.logits.array() == 0.0).all());
}

TEST(Forward, SymmetricStemsGiveIdenticalEmbeddings) {
  Rng rng(2);
  auto enc = TwoStreamEncoder::init(small_shape(), rng);
  enc.infrared_stem = enc.visible_stem;
  const Vector x = rng.normal_vector(5);
  Matrix f(2, 5);
  f.row(0) = x.transpose();
  f.row(1) = x.transpose();
  const auto c = forward(enc, FeatureBatch(f, {Modality::kVisible, Modality::kInfrared}, {0, 0}), true);
  EXPECT_EQ(c.embedding.row(0), c.embedding.row(1));
}

TEST(Forward, MatchesLayerByLayerOracle) {
  Rng rng(3);
  const auto enc = TwoStreamEncoder::init(small_shape(), rng);
  const FeatureBatch b(rng.normal_matrix(6, 5),
                       {Modality::kVisible, Modality::kInfrared, Modality::kVisible, Modality::kInfrared,
                        Modality::kVisible, Modality::kInfrared},
                       {0, 0, 1, 1, 2, 2});
  for (bool norm : {false, true}) {
    const auto c = forward(enc, b, norm);
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const auto want = oracle_embedding(enc, b.row(i).transpose(), b.modality(i), norm);
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(c.embedding(i, j), want[static_cast<std::size_t>(j)], 1e-10);
    }
  }
}

TEST(Forward, DimensionMismatch) {
  Rng rng(4);
  const auto enc = TwoStreamEncoder::init(small_shape(), rng);
  EXPECT_THROW(forward(enc, FeatureBatch(Matrix::Zero(1, 3), {Modality::kVisible}, {0}), true), DimensionMismatch);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(5);
  const EncoderShape shape{4, 5, 5, 4, 2};
  const auto enc = TwoStreamEncoder::init(shape, rng);
  const FeatureBatch b(rng.normal_matrix(4, 4),
                       {Modality::kVisible, Modality::kInfrared, Modality::kVisible, Modality::kInfrared},
                       {0, 0, 1, 1});
  // Arbitrary smooth objective: <G_e, embedding> + <G_l, logits>.
  const Matrix ge = rng.normal_matrix(4, 4);
  const Matrix gl = rng.normal_matrix(4, 2);
  const auto objective = [&](const TwoStreamEncoder& e) {
    const auto c = forward(e, b, true);
    return (c.embedding.array() * ge.array()).sum() + (c.logits.array() * gl.array()).sum();
  };
  const auto grads = backward(enc, forward(enc, b, true), ge, gl);

  std::vector<std::string> names;
  enc.for_each([&](const std::string& n, const Matrix&) { names.push_back(n); });
  for (const auto& name : names) {
    Matrix analytic, base;
    grads.for_each([&](const std::string& n, const Matrix& m) { if (n == name) analytic = m; });
    enc.for_each([&](const std::string& n, const Matrix& m) { if (n == name) base = m; });
    const auto f = [&](const oracle::Vec& x) {
      TwoStreamEncoder e = enc;
      e.for_each([&](const std::string& n, Matrix& m) {
        if (n == name) m = testutil::unflatten(x, m.rows(), m.cols());
      });
      return objective(e);
    };
    const auto numeric = oracle::finite_diff_grad(f, testutil::flatten(base));
    EXPECT_LT(testutil::max_rel_err(testutil::flatten(analytic), numeric), 1e-4) << name;
  }
}

TEST(LrSchedule, ConstantBeforeFirstDecay) {
  LrSchedule s;
  s.decay_points = {{40, 0.1}};
  EXPECT_EQ(lr_at(s, 10, 0.3), 0.1);
}

TEST(LrSchedule, DecayAtFortyAndSixty) {
  LrSchedule s;
  s.base_lr = 0.1;
  s.decay_points = {{40, 0.1}, {60, 0.01}};
  EXPECT_NEAR(lr_at(s, 65, 0.0), 0.001, 1e-15);
  EXPECT_NEAR(lr_at(s, 45, 0.0), 0.01, 1e-15);
  EXPECT_EQ(lr_at(s, 39, 0.99), 0.1);
}

TEST(LrSchedule, LinearWarmup) {
  LrSchedule s;
  s.warmup_epochs = 1;
  EXPECT_EQ(lr_at(s, 0, 0.5), 0.05);
  EXPECT_EQ(lr_at(s, 0, 0.0), 0.0);
  EXPECT_EQ(lr_at(s, 1, 0.0), 0.1);
}

TEST(LrSchedule, Validation) {
  LrSchedule s;
  s.decay_points = {{10, 0.1}, {10, 0.01}};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.decay_points = {{10, 1.5}};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s = LrSchedule{};
  s.momentum = 1.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(Sgd, MomentumAlgebraOnQuadratic) {
  // f(p) = 0.5 (3 p0^2 + p1^2), gradient (3 p0, p1).
  Matrix p(2, 1), v(2, 1);
  p << 1.0, -2.0;
  v << 0.5, 0.25;
  const Matrix g = (Matrix(2, 1) << 3.0, -2.0).finished();
  sgd_momentum_step(p, v, g, 0.1, 0.9);
  EXPECT_EQ(v(0, 0), 0.9 * 0.5 + 3.0);
  EXPECT_EQ(v(1, 0), 0.9 * 0.25 - 2.0);
  EXPECT_EQ(p(0, 0), 1.0 - 0.1 * (0.9 * 0.5 + 3.0));
  EXPECT_EQ(p(1, 0), -2.0 - 0.1 * (0.9 * 0.25 - 2.0));
}

TEST(Encoder, ParameterCount) {
  Rng rng(6);
  const auto enc = TwoStreamEncoder::init(EncoderShape{}, rng);
  // Two stems 12->16, trunk 16->16->8, head 8->10.
  EXPECT_EQ(enc.parameter_count(), 2u * (12 * 16 + 16) + (16 * 16 + 16) + (16 * 8 + 8) + (8 * 10 + 10));
}
