#include <cmath>

#include <gtest/gtest.h>

#include "cortexkit/biolwbp.hpp"
#include "cortexkit/lwbp.hpp"

using namespace cortexkit;

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Matrix random_matrix(Rng& rng, int r, int c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

Matrix random_onehot(Rng& rng, int rows, int k) {
  std::vector<int> labels;
  for (int i = 0; i < rows; ++i) labels.push_back(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(k))));
  return one_hot(labels, k);
}

BioModule randomized(const BioModuleConfig& cfg, Rng& rng) {
  BioModule m(cfg, rng);
  m.bias().value = random_matrix(rng, 1, cfg.width, -0.3, 0.3);
  m.alpha().value = random_matrix(rng, 1, cfg.loss_neurons, 0.5, 2.0);
  m.pred_bias().value = random_matrix(rng, 1, cfg.loss_neurons, -0.3, 0.3);
  return m;
}

double module_loss(const BioModule& m, const Matrix& x, const Matrix& y) { return bio_loss(m.forward(x).pred, y); }

// Central differences of the loss w.r.t. every entry of `p`.
Matrix numeric_grad(BioModule& m, Param& p, const Matrix& x, const Matrix& y) {
  const double eps = 1e-5;
  Matrix g(p.value.rows(), p.value.cols());
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    const double keep = p.value.data()[i];
    p.value.data()[i] = keep + eps;
    const double up = module_loss(m, x, y);
    p.value.data()[i] = keep - eps;
    const double down = module_loss(m, x, y);
    p.value.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * eps);
  }
  return g;
}

double max_rel(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-6});
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / d);
  }
  return worst;
}

}  // namespace

TEST(BioForward, ZeroWeightsPassInputThrough) {
  Rng rng(1);
  BioModule m(BioModuleConfig{6, 6, 3, true}, rng);
  m.weight().value.setZero();
  const Matrix x = random_matrix(rng, 4, 6);
  const auto t = m.forward(x);
  EXPECT_TRUE(bit_equal(t.output, x));
  for (int k = 0; k < 3; ++k) {
    for (int r = 0; r < 4; ++r) EXPECT_DOUBLE_EQ(t.out_mean(r, k), (x(r, 2 * k) + x(r, 2 * k + 1)) / 2.0);
  }
}

TEST(BioForward, ZeroAlphaGivesHalf) {
  Rng rng(2);
  BioModule m(BioModuleConfig{4, 4, 2, true}, rng);
  m.alpha().value.setZero();
  const auto t = m.forward(random_matrix(rng, 3, 4));
  EXPECT_TRUE(bit_equal(t.pred, Matrix::Constant(3, 2, 0.5)));
}

TEST(BioForward, MatchesComposition) {
  Rng rng(3);
  BioModule m = randomized(BioModuleConfig{6, 6, 2, true}, rng);
  const Matrix x = random_matrix(rng, 5, 6);
  const auto t = m.forward(x);
  const Matrix out = shortcut_forward(x, m.weight().value, m.bias().value, Activation::Tanh);
  EXPECT_LT((t.output - out).cwiseAbs().maxCoeff(), 1e-15);
  for (int r = 0; r < 5; ++r) {
    for (int k = 0; k < 2; ++k) {
      const double mean = out.row(r).segment(3 * k, 3).mean();
      EXPECT_NEAR(t.pred(r, k), sigmoid(m.alpha().value(0, k) * mean + m.pred_bias().value(0, k)), 1e-15);
    }
  }
  // Tanh range of the branch and sigmoid range of the prediction.
  EXPECT_LT((t.output - x).cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT(t.pred.minCoeff(), 0.0);
  EXPECT_LT(t.pred.maxCoeff(), 1.0);
}

TEST(BioLoss, KnownValues) {
  const Matrix label = one_hot({3, 7}, 10);
  EXPECT_DOUBLE_EQ(bio_loss(Matrix::Constant(2, 10, 0.5), label), 0.25);
  EXPECT_EQ(bio_loss(label, label), 0.0);
  Rng rng(4);
  const Matrix p = random_matrix(rng, 3, 10, 0.0, 1.0);
  const Matrix y = random_onehot(rng, 3, 10);
  double want = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 10; ++k) want += (y(r, k) - p(r, k)) * (y(r, k) - p(r, k)) / 10.0;
  }
  EXPECT_NEAR(bio_loss(p, y), want / 3.0, 1e-15);
  EXPECT_THROW(bio_loss(p, Matrix::Zero(3, 9)), DimensionError);
}

TEST(BioDeltas, VanishWhenPredictionIsExact) {
  Rng rng(5);
  BioModule m = randomized(BioModuleConfig{4, 4, 2, true}, rng);
  const auto t = m.forward(random_matrix(rng, 3, 4));
  const auto d = m.deltas(t, t.pred, 0.1);
  EXPECT_EQ(d.weight.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(d.bias.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(d.alpha.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(d.pred_bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BioDeltas, EqualMinusLrTimesNumericGradient) {
  Rng rng(6);
  const double lr = 0.05;
  for (bool shortcut : {false, true}) {
    BioModule m = randomized(BioModuleConfig{shortcut ? 8 : 5, 8, 4, shortcut}, rng);
    const Matrix x = random_matrix(rng, 7, m.config().in);
    const Matrix y = random_onehot(rng, 7, 4);
    const auto d = m.deltas(m.forward(x), y, lr);
    EXPECT_LT(max_rel(d.weight, -lr * numeric_grad(m, m.weight(), x, y)), 1e-6);
    EXPECT_LT(max_rel(d.bias, -lr * numeric_grad(m, m.bias(), x, y)), 1e-6);
    EXPECT_LT(max_rel(d.alpha, -lr * numeric_grad(m, m.alpha(), x, y)), 1e-6);
    EXPECT_LT(max_rel(d.pred_bias, -lr * numeric_grad(m, m.pred_bias(), x, y)), 1e-6);
  }
}

TEST(BioDeltas, PaperLiteralFactorDiffersFromGradient) {
  Rng rng(7);
  BioModule m = randomized(BioModuleConfig{6, 6, 2, true}, rng);
  const Matrix x = random_matrix(rng, 5, 6);
  const Matrix y = random_onehot(rng, 5, 2);
  const auto t = m.forward(x);
  const auto lit = m.deltas(t, y, 0.1, BioGradientMode::PaperLiteral);
  const auto con = m.deltas(t, y, 0.1, BioGradientMode::Consistent);
  EXPECT_GT(max_rel(lit.weight, con.weight), 1e-3);
  EXPECT_TRUE(bit_equal(lit.alpha, con.alpha));
  EXPECT_TRUE(bit_equal(lit.pred_bias, con.pred_bias));
}

TEST(BioDeltas, HandComputedFourTwoCase) {
  // D = 4, K = 2, rho = 2, one sample, everything written out per neuron.
  Rng rng(8);
  BioModule m(BioModuleConfig{4, 4, 2, true}, rng);
  m.weight().value << 0.1, -0.2, 0.3, 0.0, 0.2, 0.1, -0.1, 0.4, -0.3, 0.2, 0.2, 0.1, 0.0, 0.3, -0.2, -0.1;
  m.bias().value << 0.05, -0.05, 0.1, 0.0;
  m.alpha().value << 1.5, 0.7;
  m.pred_bias().value << 0.1, -0.2;
  Matrix x(1, 4);
  x << 0.5, -0.4, 0.3, 0.8;
  const Matrix y = one_hot({1}, 2);
  const double lr = 0.1;

  double branch[4], out[4];
  for (int j = 0; j < 4; ++j) {
    double z = m.bias().value(0, j);
    for (int i = 0; i < 4; ++i) z += x(0, i) * m.weight().value(i, j);
    branch[j] = std::tanh(z);
    out[j] = x(0, j) + branch[j];
  }
  double mean[2], pred[2], e[2];
  for (int k = 0; k < 2; ++k) {
    mean[k] = (out[2 * k] + out[2 * k + 1]) / 2.0;
    pred[k] = sigmoid(m.alpha().value(0, k) * mean[k] + m.pred_bias().value(0, k));
    e[k] = 2.0 * (y(0, k) - pred[k]) / 2.0 * pred[k] * (1 - pred[k]);
  }
  const auto d = m.deltas(m.forward(x), y, lr);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(d.alpha(k), lr * e[k] * mean[k], 1e-15);
    EXPECT_NEAR(d.pred_bias(k), lr * e[k], 1e-15);
  }
  for (int j = 0; j < 4; ++j) {
    const int k = j / 2;
    const double gj = e[k] * m.alpha().value(0, k) / 2.0 * (1 - branch[j] * branch[j]);
    EXPECT_NEAR(d.bias(j), lr * gj, 1e-15);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(d.weight(i, j), lr * gj * x(0, i), 1e-15);
  }
}

TEST(BioDeltas, WeightColumnsReadOnlyTheirOwner) {
  Rng rng(9);
  BioModule m = randomized(BioModuleConfig{6, 6, 3, true}, rng);
  const Matrix x = random_matrix(rng, 4, 6);
  const auto t = m.forward(x);
  const Matrix y = random_onehot(rng, 4, 3);
  const auto full = m.deltas(t, y, 0.1);
  for (int k = 0; k < 3; ++k) {
    // Make every other loss neuron exact so its error vanishes.
    Matrix masked = t.pred;
    masked.col(k) = y.col(k);
    const auto only_k = m.deltas(t, masked, 0.1);
    for (int j = 0; j < 6; ++j) {
      if (m.owner(j) != k) continue;
      EXPECT_TRUE(bit_equal(only_k.weight.col(j), full.weight.col(j))) << "neuron " << j;
    }
  }
}

TEST(BioModule, BlocksPartitionNeurons) {
  Rng rng(10);
  BioModule m(BioModuleConfig{900, 900, 10, true}, rng);
  EXPECT_EQ(m.rho(), 90);
  std::vector<int> count(10, 0);
  for (int j = 0; j < 900; ++j) {
    ASSERT_GE(m.owner(j), 0);
    ASSERT_LT(m.owner(j), 10);
    ++count[static_cast<std::size_t>(m.owner(j))];
  }
  for (int c : count) EXPECT_EQ(c, 90);
}

TEST(BioModule, WidthMustDivide) {
  Rng rng(11);
  EXPECT_THROW(BioModule(BioModuleConfig{899, 899, 10, true}, rng), std::invalid_argument);
  EXPECT_THROW(BioModule(BioModuleConfig{10, 20, 10, true}, rng), DimensionError);
}

TEST(BioNetwork, SingleModuleLossFallsOnToySet) {
  Rng rng(12);
  BioNetwork net(4, 4, 2, 1, rng);
  Matrix x(2, 4);
  x << 1, 0, 1, 0, 0, 1, 0, 1;
  const Matrix y = one_hot({0, 1}, 2);
  double prev = 1e9;
  for (int s = 0; s < 200; ++s) {
    const double loss = net.train_step(x, y, BioTrainOptions{0.5}).loss[0];
    EXPECT_LT(loss, prev) << "step " << s;
    prev = loss;
  }
}

TEST(BioNetwork, AccuracyIsArgmaxOfPrediction) {
  Rng rng(13);
  BioNetwork net(6, 6, 3, 2, rng);
  const Matrix x = random_matrix(rng, 20, 6);
  const Matrix y = random_onehot(rng, 20, 3);
  const auto preds = net.predictions(x);
  const auto acc = net.layerwise_accuracy(x, y, 7);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto arg = argmax_rows(preds[k]);
    const auto truth = argmax_rows(y);
    int hits = 0;
    for (std::size_t i = 0; i < arg.size(); ++i) hits += arg[i] == truth[i];
    EXPECT_DOUBLE_EQ(acc[k], hits / 20.0);
  }
}

TEST(BioModule, ModeNames) {
  EXPECT_EQ(parse_gradient_mode("consistent"), BioGradientMode::Consistent);
  EXPECT_EQ(parse_gradient_mode("paper-literal"), BioGradientMode::PaperLiteral);
  EXPECT_THROW(parse_gradient_mode("other"), std::invalid_argument);
}
