#include "cortexkit/nncore.hpp"

#include <algorithm>
#include <cmath>

namespace cortexkit {

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "leakyrelu" || name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "identity" || name == "none") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::LeakyRelu: return "leakyrelu";
    case Activation::Identity: return "identity";
  }
  return "?";
}

LossKind parse_loss(std::string_view name) {
  if (name == "ce" || name == "cross_entropy" || name == "crossentropy") return LossKind::CrossEntropy;
  if (name == "mse") return LossKind::MeanSquaredError;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  return kind == LossKind::CrossEntropy ? "cross_entropy" : "mse";
}

double activate(double v, Activation act) {
  switch (act) {
    case Activation::Tanh: return std::tanh(v);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::LeakyRelu: return v >= 0.0 ? v : kLeakySlope * v;
    case Activation::Identity: return v;
  }
  return v;
}

Matrix activate(const Matrix& x, Activation act) {
  switch (act) {
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Sigmoid: return (1.0 / (1.0 + (-x.array()).exp())).matrix();
    case Activation::LeakyRelu:
      return x.unaryExpr([](double v) { return v >= 0.0 ? v : kLeakySlope * v; });
    case Activation::Identity: return x;
  }
  return x;
}

Matrix activation_derivative(const Matrix& pre, const Matrix& out, Activation act) {
  switch (act) {
    case Activation::Tanh: return (1.0 - out.array().square()).matrix();
    case Activation::Sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    case Activation::LeakyRelu:
      return pre.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : kLeakySlope; });
    case Activation::Identity: return Matrix::Ones(pre.rows(), pre.cols());
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

Matrix linear_forward(const Matrix& x, const Matrix& w, const RowVector& b) {
  require_dims(x.cols() == w.rows(),
               "linear_forward: input " + shape_str(x) + " vs weight " + shape_str(w));
  require_dims(b.size() == w.cols(), "linear_forward: bias length " + std::to_string(b.size()) +
                                         " vs " + std::to_string(w.cols()) + " outputs");
  Matrix y = x * w;
  y.rowwise() += b;
  return y;
}

Matrix shortcut_forward(const Matrix& x, const Matrix& w, const RowVector& b, Activation act) {
  require_dims(w.rows() == w.cols(), "shortcut_forward: weight must be square, got " + shape_str(w));
  Matrix y = activate(linear_forward(x, w, b), act);
  y += x;
  return y;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

namespace {

void check_label(const Matrix& pred, const Matrix& label) {
  require_dims(pred.rows() == label.rows() && pred.cols() == label.cols(),
               "loss: prediction " + shape_str(pred) + " vs label " + shape_str(label));
  require_dims(pred.rows() > 0, "loss: empty batch");
}

}  // namespace

double loss_value(const Matrix& pred, const Matrix& label, LossKind kind) {
  check_label(pred, label);
  const auto batch = static_cast<double>(pred.rows());
  if (kind == LossKind::MeanSquaredError) {
    return (pred - label).squaredNorm() / (batch * static_cast<double>(pred.cols()));
  }
  double total = 0.0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    const double mx = pred.row(r).maxCoeff();
    const double lse = mx + std::log((pred.row(r).array() - mx).exp().sum());
    // Soft labels are allowed: -sum_c label_c * log softmax_c.
    total += (label.row(r).array() * (lse - pred.row(r).array())).sum();
  }
  return total / batch;
}

Matrix loss_gradient(const Matrix& pred, const Matrix& label, LossKind kind) {
  check_label(pred, label);
  const auto batch = static_cast<double>(pred.rows());
  if (kind == LossKind::MeanSquaredError) {
    return 2.0 * (pred - label) / (batch * static_cast<double>(pred.cols()));
  }
  Matrix g = softmax_rows(pred);
  for (Eigen::Index r = 0; r < g.rows(); ++r) g.row(r) *= label.row(r).sum();
  return (g - label) / batch;
}

double loss_forward(const Matrix& x, const Matrix& w, const RowVector& b, Activation act,
                    LossKind kind, const Matrix& label) {
  return loss_value(activate(linear_forward(x, w, b), act), label, kind);
}

Vector normalize_sample(const Vector& x) {
  if (x.size() < 2) throw std::invalid_argument("normalize_sample: need at least 2 values");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  if (!(var > 0.0)) throw std::invalid_argument("normalize_sample: zero standard deviation");
  return (x.array() - mean) / std::sqrt(var);
}

void normalize_rows(Matrix& batch) {
  for (Eigen::Index r = 0; r < batch.rows(); ++r) {
    batch.row(r) = normalize_sample(batch.row(r).transpose()).transpose();
  }
}

Param::Param(Matrix init)
    : value(std::move(init)),
      grad(Matrix::Zero(value.rows(), value.cols())),
      rms(Matrix::Zero(value.rows(), value.cols())) {}

void rmsprop_step(Param& p, double lr, const RmsPropConfig& cfg) {
  p.rms.array() = cfg.alpha * p.rms.array() + (1.0 - cfg.alpha) * p.grad.array().square();
  p.value.array() -= lr * p.grad.array() / (p.rms.array().sqrt() + cfg.eps);
}

void sgd_step(Param& p, double lr) {
  p.value -= lr * p.grad;
}

Matrix uniform_init(int fan_in, int fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  return w;
}

Dense::Dense(const LayerSpec& spec, Rng& rng)
    : Dense(spec, uniform_init(spec.in, spec.out, rng), RowVector::Zero(spec.out)) {}

Dense::Dense(const LayerSpec& spec, Matrix weight, RowVector bias) : spec_(spec) {
  require_dims(spec.in > 0 && spec.out > 0, "Dense: dimensions must be positive");
  require_dims(!spec.shortcut || spec.in == spec.out,
               "Dense: shortcut needs in == out, got " + std::to_string(spec.in) + " -> " +
                   std::to_string(spec.out));
  require_dims(weight.rows() == spec.in && weight.cols() == spec.out,
               "Dense: weight " + shape_str(weight) + " does not match spec");
  require_dims(bias.size() == spec.out, "Dense: bias length mismatch");
  weight_ = Param(std::move(weight));
  bias_ = Param(Matrix(bias));
  if (!spec.bias) bias_.value.setZero();
}

void Dense::check_input(const Matrix& x) const {
  require_dims(x.cols() == spec_.in,
               "Dense: expected " + std::to_string(spec_.in) + " inputs, got " + shape_str(x));
}

Matrix Dense::forward(const Matrix& x) {
  check_input(x);
  input_ = x;
  pre_ = x * weight_.value;
  if (spec_.bias) pre_.rowwise() += bias_.value.row(0);
  act_out_ = activate(pre_, spec_.act);
  traced_ = true;
  if (spec_.shortcut) return act_out_ + x;
  return act_out_;
}

Matrix Dense::infer(const Matrix& x) const {
  check_input(x);
  Matrix pre = x * weight_.value;
  if (spec_.bias) pre.rowwise() += bias_.value.row(0);
  Matrix y = activate(pre, spec_.act);
  if (spec_.shortcut) y += x;
  return y;
}

Matrix Dense::backward(const Matrix& grad_out, bool need_input_grad) {
  if (!traced_) throw StateError("Dense::backward called without a recorded forward pass");
  require_dims(grad_out.rows() == pre_.rows() && grad_out.cols() == pre_.cols(),
               "Dense::backward: gradient " + shape_str(grad_out) + " vs output " + shape_str(pre_));
  Matrix delta = grad_out;
  if (spec_.act != Activation::Identity) {
    delta.array() *= activation_derivative(pre_, act_out_, spec_.act).array();
  }
  weight_.grad.noalias() += input_.transpose() * delta;
  if (spec_.bias) bias_.grad.row(0) += delta.colwise().sum();
  if (!need_input_grad) return {};
  Matrix grad_in = delta * weight_.value.transpose();
  if (spec_.shortcut) grad_in += grad_out;
  return grad_in;
}

void Dense::zero_grad() {
  weight_.zero_grad();
  bias_.zero_grad();
}

void Dense::rmsprop(double lr, const RmsPropConfig& cfg) {
  rmsprop_step(weight_, lr, cfg);
  if (spec_.bias) rmsprop_step(bias_, lr, cfg);
}

void Dense::sgd(double lr) {
  sgd_step(weight_, lr);
  if (spec_.bias) sgd_step(bias_, lr);
}

std::vector<Param*> Dense::params() {
  if (spec_.bias) return {&weight_, &bias_};
  return {&weight_};
}

std::vector<const Param*> Dense::params() const {
  if (spec_.bias) return {&weight_, &bias_};
  return {&weight_};
}

LossHead::LossHead(int in, int label_dim, LossKind kind, Rng& rng, Activation act)
    : layer_(LayerSpec{in, label_dim, act, false, true}, rng), kind_(kind) {}

double LossHead::forward_backward(const Matrix& x, const Matrix& label, Matrix* grad_in) {
  const Matrix pred = layer_.forward(x);
  const double loss = loss_value(pred, label, kind_);
  Matrix g = layer_.backward(loss_gradient(pred, label, kind_), grad_in != nullptr);
  if (grad_in) *grad_in = std::move(g);
  return loss;
}

}  // namespace cortexkit
