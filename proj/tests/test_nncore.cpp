#include <cmath>

#include <gtest/gtest.h>

#include "cortexkit/nncore.hpp"

using namespace cortexkit;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

RowVector random_row(Rng& rng, int c) {
  RowVector v(c);
  for (int i = 0; i < c; ++i) v(i) = uniform(rng, -1.0, 1.0);
  return v;
}

// Plain triple loop, kept free of Eigen expressions on purpose.
Matrix naive_linear(const Matrix& x, const Matrix& w, const RowVector& b) {
  Matrix y(x.rows(), w.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = b(j);
      for (Eigen::Index k = 0; k < x.cols(); ++k) s += x(i, k) * w(k, j);
      y(i, j) = s;
    }
  }
  return y;
}

double scalar_act(double v, Activation a) {
  switch (a) {
    case Activation::Tanh: return std::tanh(v);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::LeakyRelu: return v > 0 ? v : 0.01 * v;
    case Activation::Identity: return v;
  }
  return v;
}

}  // namespace

TEST(LinearForward, IdentityWeights) {
  Matrix x(1, 2);
  x << 1, 0;
  const Matrix y = linear_forward(x, Matrix::Identity(2, 2), RowVector::Zero(2));
  EXPECT_EQ(y(0, 0), 1.0);
  EXPECT_EQ(y(0, 1), 0.0);
}

TEST(LinearForward, ColumnOfOnesPlusBias) {
  Matrix x(1, 2);
  x << 1, 2;
  Matrix w(2, 1);
  w << 1, 1;
  RowVector b(1);
  b << 3;
  EXPECT_EQ(linear_forward(x, w, b)(0, 0), 6.0);
}

TEST(LinearForward, MatchesTripleLoop) {
  Rng rng(11);
  const Matrix x = random_matrix(rng, 7, 5);
  const Matrix w = random_matrix(rng, 5, 3);
  const RowVector b = random_row(rng, 3);
  const Matrix got = linear_forward(x, w, b);
  const Matrix want = naive_linear(x, w, b);
  EXPECT_LT((got - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LinearForward, ShapeMismatchThrows) {
  EXPECT_THROW(linear_forward(Matrix::Zero(2, 3), Matrix::Zero(2, 2), RowVector::Zero(2)),
               DimensionError);
  EXPECT_THROW(linear_forward(Matrix::Zero(2, 2), Matrix::Zero(2, 2), RowVector::Zero(3)),
               DimensionError);
}

TEST(Activate, KnownValues) {
  EXPECT_EQ(activate(0.0, Activation::Tanh), 0.0);
  EXPECT_EQ(activate(0.0, Activation::Sigmoid), 0.5);
  EXPECT_DOUBLE_EQ(activate(-1.0, Activation::LeakyRelu), -0.01);
  EXPECT_EQ(activate(2.0, Activation::LeakyRelu), 2.0);
  EXPECT_EQ(kLeakySlope, 0.01);
}

TEST(Activate, SigmoidMonotoneTowardOne) {
  double prev = activate(0.0, Activation::Sigmoid);
  for (double v = 1.0; v <= 40.0; v += 1.0) {
    const double s = activate(v, Activation::Sigmoid);
    EXPECT_GE(s, prev);
    EXPECT_LE(s, 1.0);
    prev = s;
  }
  EXPECT_GT(prev, 1.0 - 1e-12);
  EXPECT_GE(activate(-800.0, Activation::Sigmoid), 0.0);
}

TEST(Activate, ParseNames) {
  EXPECT_EQ(parse_activation("tanh"), Activation::Tanh);
  EXPECT_EQ(parse_activation("leakyrelu"), Activation::LeakyRelu);
  EXPECT_THROW(parse_activation("relu6"), std::invalid_argument);
  for (auto a : {Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu, Activation::Identity}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
}

TEST(ShortcutForward, ZeroWeightsIsIdentityBitForBit) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(rng, 9, 6, -50.0, 50.0);
    const Matrix y = shortcut_forward(x, Matrix::Zero(6, 6), RowVector::Zero(6), Activation::Tanh);
    EXPECT_TRUE(bit_equal(x, y));
  }
}

TEST(ShortcutForward, ScalarCase) {
  Matrix x(1, 1), w(1, 1);
  x << 1;
  w << 0;
  RowVector b(1);
  b << 0.5;
  EXPECT_DOUBLE_EQ(shortcut_forward(x, w, b, Activation::Tanh)(0, 0), 1.0 + std::tanh(0.5));
}

TEST(ShortcutForward, ComposesPrimitives) {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 4, 3);
  const Matrix w = random_matrix(rng, 3, 3);
  const RowVector b = random_row(rng, 3);
  for (auto a : {Activation::Tanh, Activation::Sigmoid, Activation::LeakyRelu}) {
    const Matrix pre = naive_linear(x, w, b);
    Matrix want = pre;
    for (Eigen::Index i = 0; i < want.size(); ++i) want.data()[i] = scalar_act(pre.data()[i], a) + x.data()[i];
    EXPECT_LT((shortcut_forward(x, w, b, a) - want).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(ShortcutForward, NonSquareRejected) {
  EXPECT_THROW(shortcut_forward(Matrix::Zero(1, 2), Matrix::Zero(2, 3), RowVector::Zero(3), Activation::Tanh),
               DimensionError);
}

TEST(Loss, UniformLogitsGiveLnTen) {
  const Matrix logits = Matrix::Constant(4, 10, 0.3);
  const Matrix labels = one_hot({0, 3, 9, 5}, 10);
  EXPECT_NEAR(loss_value(logits, labels, LossKind::CrossEntropy), std::log(10.0), 1e-14);
}

TEST(Loss, PerfectMseIsZero) {
  Rng rng(2);
  const Matrix p = random_matrix(rng, 3, 4);
  EXPECT_EQ(loss_value(p, p, LossKind::MeanSquaredError), 0.0);
}

TEST(Loss, ThreeClassCrossEntropyByHand) {
  Matrix logits(2, 3);
  logits << 1.0, 2.0, 0.5, -1.0, 0.0, 3.0;
  const Matrix labels = one_hot({1, 0}, 3);
  double want = 0.0;
  for (int r = 0; r < 2; ++r) {
    double z = 0.0;
    for (int c = 0; c < 3; ++c) z += std::exp(logits(r, c));
    const int t = r == 0 ? 1 : 0;
    want += -std::log(std::exp(logits(r, t)) / z);
  }
  EXPECT_NEAR(loss_value(logits, labels, LossKind::CrossEntropy), want / 2.0, 1e-14);
}

TEST(Loss, LossForwardComposes) {
  Rng rng(9);
  const Matrix x = random_matrix(rng, 5, 4);
  const Matrix w = random_matrix(rng, 4, 3);
  const RowVector b = random_row(rng, 3);
  const Matrix label = one_hot({0, 1, 2, 1, 0}, 3);
  const double got = loss_forward(x, w, b, Activation::Identity, LossKind::CrossEntropy, label);
  EXPECT_NEAR(got, loss_value(naive_linear(x, w, b), label, LossKind::CrossEntropy), 1e-14);
  EXPECT_THROW(loss_forward(x, w, b, Activation::Identity, LossKind::CrossEntropy, one_hot({0, 1}, 3)),
               DimensionError);
}

TEST(Loss, SoftmaxRowsSumToOne) {
  Rng rng(4);
  const Matrix logits = random_matrix(rng, 50, 10, -300.0, 300.0);
  const Matrix p = softmax_rows(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
}

TEST(NormalizeSample, TwoPoints) {
  Vector x(2);
  x << 0, 2;
  const Vector y = normalize_sample(x);
  EXPECT_EQ(y(0), -1.0);
  EXPECT_EQ(y(1), 1.0);
}

TEST(NormalizeSample, MomentsOfRandomInput) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(100);
    for (int i = 0; i < 100; ++i) x(i) = uniform(rng, -5.0, 20.0);
    const Vector y = normalize_sample(x);
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    EXPECT_LT(std::abs(mean), 1e-12);
    EXPECT_LT(std::abs(sd - 1.0), 1e-9);
  }
}

TEST(NormalizeSample, ConstantInputThrows) {
  EXPECT_THROW(normalize_sample(Vector::Constant(5, 3.0)), std::invalid_argument);
}

TEST(Backward, SingleLinearMseHandFormula) {
  Rng rng(6);
  const int d = 3;
  Dense layer(LayerSpec{4, d, Activation::Identity, false, true}, rng);
  const Matrix x = random_matrix(rng, 1, 4);
  const Matrix label = random_matrix(rng, 1, d);
  layer.zero_grad();
  const Matrix pred = layer.forward(x);
  layer.backward(loss_gradient(pred, label, LossKind::MeanSquaredError), false);
  // dL/dW = 2 x^T (pred - label) / D for one sample
  const Matrix want = 2.0 * x.transpose() * (pred - label) / d;
  EXPECT_LT((layer.weight().grad - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Backward, ZeroLossRegionHasZeroGradients) {
  Rng rng(7);
  Dense layer(LayerSpec{3, 2, Activation::Tanh, false, true}, rng);
  const Matrix x = random_matrix(rng, 5, 3);
  layer.zero_grad();
  const Matrix pred = layer.forward(x);
  layer.backward(loss_gradient(pred, pred, LossKind::MeanSquaredError));
  EXPECT_EQ(layer.weight().grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(layer.bias().grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, WithoutForwardIsStateError) {
  Rng rng(1);
  Dense layer(LayerSpec{2, 2, Activation::Tanh, false, true}, rng);
  EXPECT_THROW(layer.backward(Matrix::Zero(1, 2)), StateError);
}

TEST(RmsProp, ZeroGradientLeavesValue) {
  Param p(Matrix::Constant(2, 2, 0.7));
  p.zero_grad();
  rmsprop_step(p, 1e-4);
  EXPECT_TRUE(bit_equal(p.value, Matrix::Constant(2, 2, 0.7)));
}

TEST(RmsProp, FirstStepMagnitude) {
  Param p(Matrix::Zero(1, 1));
  p.grad(0, 0) = 1.0;
  rmsprop_step(p, 1e-4);
  EXPECT_NEAR(p.value(0, 0), -1e-4 / (std::sqrt(0.01) + 1e-8), 1e-15);
  EXPECT_NEAR(p.value(0, 0), -0.001, 1e-9);
}

TEST(RmsProp, TwoStepRecurrence) {
  const double a = 0.99, g = 0.3, lr = 0.01;
  Param p(Matrix::Zero(1, 1));
  double v = 0.0, r = 0.0;
  for (int s = 0; s < 2; ++s) {
    p.grad(0, 0) = g;
    rmsprop_step(p, lr);
    r = a * r + (1 - a) * g * g;
    v -= lr * g / (std::sqrt(r) + 1e-8);
  }
  EXPECT_NEAR(p.rms(0, 0), a * (1 - a) * g * g + (1 - a) * g * g, 1e-18);
  EXPECT_NEAR(p.value(0, 0), v, 1e-15);
  EXPECT_GE(p.rms.minCoeff(), 0.0);
}

TEST(Init, UniformWithinFanInBoundAndZeroBias) {
  Rng rng(12);
  Dense layer(LayerSpec{25, 40, Activation::Tanh, false, true}, rng);
  EXPECT_LE(layer.weight().value.cwiseAbs().maxCoeff(), 1.0 / 5.0);
  EXPECT_EQ(layer.bias().value.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(layer.weight().value.allFinite());
}

TEST(Determinism, SameSeedSameUpdates) {
  auto run = [] {
    Rng rng(21);
    Dense layer(LayerSpec{3, 3, Activation::Tanh, true, true}, rng);
    const Matrix x = random_matrix(rng, 8, 3);
    const Matrix label = random_matrix(rng, 8, 3);
    for (int s = 0; s < 10; ++s) {
      layer.zero_grad();
      const Matrix pred = layer.forward(x);
      layer.backward(loss_gradient(pred, label, LossKind::MeanSquaredError), false);
      layer.rmsprop(1e-2);
    }
    return layer.weight().value;
  };
  EXPECT_TRUE(bit_equal(run(), run()));
}
