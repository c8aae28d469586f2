#include "cortexkit/biolwbp.hpp"

#include <algorithm>

#include "cortexkit/lwbp.hpp"

namespace cortexkit {

BioGradientMode parse_gradient_mode(const std::string& name) {
  if (name == "consistent") return BioGradientMode::Consistent;
  if (name == "paper-literal" || name == "literal") return BioGradientMode::PaperLiteral;
  throw std::invalid_argument("unknown gradient mode '" + name + "'");
}

std::string to_string(BioGradientMode mode) {
  return mode == BioGradientMode::Consistent ? "consistent" : "paper-literal";
}

double bio_loss(const Matrix& pred, const Matrix& label) {
  require_dims(pred.rows() == label.rows() && pred.cols() == label.cols(),
               "bio_loss: prediction " + shape_str(pred) + " vs label " + shape_str(label));
  require_dims(pred.rows() > 0, "bio_loss: empty batch");
  return (label - pred).squaredNorm() / static_cast<double>(pred.cols()) /
         static_cast<double>(pred.rows());
}

BioModule::BioModule(const BioModuleConfig& cfg, Rng& rng) : cfg_(cfg) {
  require_dims(cfg.width > 0 && cfg.loss_neurons > 0, "BioModule: sizes must be positive");
  if (cfg.width % cfg.loss_neurons != 0) {
    throw DimensionError("BioModule: width " + std::to_string(cfg.width) +
                         " is not divisible by " + std::to_string(cfg.loss_neurons) +
                         " loss neurons");
  }
  require_dims(!cfg.shortcut || cfg.in == cfg.width, "BioModule: shortcut needs in == width");
  weight_ = Param(uniform_init(cfg.in, cfg.width, rng));
  bias_ = Param(Matrix::Zero(1, cfg.width));
  alpha_ = Param(Matrix::Constant(1, cfg.loss_neurons, cfg.alpha_init));
  pred_bias_ = Param(Matrix::Zero(1, cfg.loss_neurons));
}

BioForwardTrace BioModule::forward(const Matrix& input) const {
  require_dims(input.cols() == cfg_.in,
               "BioModule: expected " + std::to_string(cfg_.in) + " inputs, got " + shape_str(input));
  BioForwardTrace t;
  t.input = input;
  t.branch = input * weight_.value;
  t.branch.rowwise() += bias_.value.row(0);
  if (cfg_.shortcut) {
    t.branch = t.branch.array().tanh().matrix();
    t.output = input + t.branch;
  } else {
    t.output = t.branch;
  }
  const int k_count = cfg_.loss_neurons;
  const int r = rho();
  t.out_mean.resize(input.rows(), k_count);
  for (int k = 0; k < k_count; ++k) {
    t.out_mean.col(k) = t.output.middleCols(static_cast<Eigen::Index>(k) * r, r).rowwise().mean();
  }
  Matrix z = t.out_mean.array().rowwise() * alpha_.value.row(0).array();
  z.rowwise() += pred_bias_.value.row(0);
  t.pred = activate(z, Activation::Sigmoid);
  return t;
}

BioDeltas BioModule::deltas(const BioForwardTrace& t, const Matrix& label, double lr,
                            BioGradientMode mode) const {
  require_dims(label.rows() == t.pred.rows() && label.cols() == t.pred.cols(),
               "BioModule::deltas: label " + shape_str(label) + " vs pred " + shape_str(t.pred));
  const auto batch = static_cast<double>(t.pred.rows());
  const auto k_count = static_cast<double>(cfg_.loss_neurons);
  const int r = rho();

  // err = -dLoss/dz per sample, z the loss neuron's pre-sigmoid input.
  const Matrix err = (2.0 * (label - t.pred).array() / k_count * t.pred.array() *
                      (1.0 - t.pred.array())).matrix();

  BioDeltas d;
  d.alpha = lr * (err.array() * t.out_mean.array()).colwise().sum() / batch;
  d.pred_bias = lr * err.colwise().sum() / batch;

  // Per pyramidal neuron: err of its owner * alpha_owner / rho * tanh'.
  Matrix g(t.output.rows(), t.output.cols());
  for (int k = 0; k < cfg_.loss_neurons; ++k) {
    const double scale = alpha_.value(0, k) / static_cast<double>(r);
    auto block = g.middleCols(static_cast<Eigen::Index>(k) * r, r);
    for (Eigen::Index j = 0; j < r; ++j) block.col(j) = err.col(k) * scale;
  }
  if (cfg_.shortcut) {
    const Matrix& act = mode == BioGradientMode::Consistent ? t.branch : t.output;
    g.array() *= 1.0 - act.array().square();
  }
  d.weight = lr * (t.input.transpose() * g) / batch;
  d.bias = lr * g.colwise().sum() / batch;
  return d;
}

void BioModule::apply(const BioDeltas& d) {
  weight_.value += d.weight;
  bias_.value.row(0) += d.bias;
  alpha_.value.row(0) += d.alpha;
  pred_bias_.value.row(0) += d.pred_bias;
}

void BioModule::apply_rmsprop(const BioDeltas& d, double lr) {
  weight_.grad = -d.weight / lr;
  bias_.grad.row(0) = -d.bias / lr;
  alpha_.grad.row(0) = -d.alpha / lr;
  pred_bias_.grad.row(0) = -d.pred_bias / lr;
  for (Param* p : {&weight_, &bias_, &alpha_, &pred_bias_}) rmsprop_step(*p, lr);
}

BioNetwork::BioNetwork(int input_dim, int width, int loss_neurons, int modules, Rng& rng) {
  require_dims(modules >= 1, "BioNetwork: need at least one module");
  modules_.emplace_back(BioModuleConfig{input_dim, width, loss_neurons, false}, rng);
  for (int k = 1; k < modules; ++k) {
    modules_.emplace_back(BioModuleConfig{width, width, loss_neurons, true}, rng);
  }
}

BioStep BioNetwork::train_step(const Matrix& batch, const Matrix& labels, const BioTrainOptions& opt) {
  BioStep step;
  Matrix signal = batch;
  for (auto& m : modules_) {
    BioForwardTrace t = m.forward(signal);
    step.loss.push_back(bio_loss(t.pred, labels));
    step.accuracy.push_back(top1_accuracy(t.pred, labels));
    const BioDeltas d = m.deltas(t, labels, opt.lr, opt.mode);
    if (opt.use_rmsprop) {
      m.apply_rmsprop(d, opt.lr);
    } else {
      m.apply(d);
    }
    signal = std::move(t.output);
  }
  return step;
}

std::vector<Matrix> BioNetwork::predictions(const Matrix& x) const {
  std::vector<Matrix> out;
  Matrix signal = x;
  for (const auto& m : modules_) {
    BioForwardTrace t = m.forward(signal);
    out.push_back(std::move(t.pred));
    signal = std::move(t.output);
  }
  return out;
}

std::vector<double> BioNetwork::layerwise_accuracy(const Matrix& x, const Matrix& labels,
                                                   Eigen::Index chunk) const {
  if (x.rows() == 0) throw std::invalid_argument("layerwise_accuracy: empty dataset");
  std::vector<double> hits(modules_.size(), 0.0);
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    const auto preds = predictions(x.middleRows(start, len));
    for (std::size_t k = 0; k < preds.size(); ++k) {
      hits[k] += top1_accuracy(preds[k], labels.middleRows(start, len)) * static_cast<double>(len);
    }
  }
  for (auto& h : hits) h /= static_cast<double>(x.rows());
  return hits;
}

}  // namespace cortexkit
