#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cortexkit/matrix.hpp"

namespace cortexkit {

enum class Activation { Tanh, Sigmoid, LeakyRelu, Identity };
enum class LossKind { CrossEntropy, MeanSquaredError };

inline constexpr double kLeakySlope = 0.01;

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation act);
LossKind parse_loss(std::string_view name);
std::string_view to_string(LossKind kind);

double activate(double v, Activation act);
Matrix activate(const Matrix& x, Activation act);

/// Derivative of the activation expressed through its pre-activation and its output.
Matrix activation_derivative(const Matrix& pre, const Matrix& out, Activation act);

/// y = x W + b, with b broadcast over rows.
Matrix linear_forward(const Matrix& x, const Matrix& w, const RowVector& b);

/// y = act(x W + b) + x. W must be square.
Matrix shortcut_forward(const Matrix& x, const Matrix& w, const RowVector& b, Activation act);

/// Row-wise softmax with log-sum-exp stabilization.
Matrix softmax_rows(const Matrix& logits);

/// CrossEntropy treats `pred` as logits; MSE averages over batch and output dims.
double loss_value(const Matrix& pred, const Matrix& label, LossKind kind);

/// d loss_value / d pred.
Matrix loss_gradient(const Matrix& pred, const Matrix& label, LossKind kind);

/// Loss layer: lossfunc(act(x W + b), label).
double loss_forward(const Matrix& x, const Matrix& w, const RowVector& b, Activation act,
                    LossKind kind, const Matrix& label);

/// (x - mean) / stddev with the population stddev. Throws on constant input.
Vector normalize_sample(const Vector& x);
void normalize_rows(Matrix& batch);

/// A learnable tensor with its gradient accumulator and RMSprop state.
struct Param {
  Matrix value;
  Matrix grad;
  Matrix rms;

  Param() = default;
  explicit Param(Matrix init);

  void zero_grad() { grad.setZero(); }
  Eigen::Index size() const { return value.size(); }
};

struct RmsPropConfig {
  double alpha = 0.99;
  double eps = 1e-8;
};

/// rms <- a*rms + (1-a)*g^2;  value <- value - lr*g/(sqrt(rms)+eps)
void rmsprop_step(Param& p, double lr, const RmsPropConfig& cfg = {});

/// Plain gradient descent on an already-populated grad.
void sgd_step(Param& p, double lr);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  bool shortcut = false;
  bool bias = true;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; zero biases.
Matrix uniform_init(int fan_in, int fan_out, Rng& rng);

/// Fully connected layer, optionally with an identity shortcut. Records the
/// last training forward pass so backward() can accumulate gradients.
class Dense {
 public:
  Dense() = default;
  Dense(const LayerSpec& spec, Rng& rng);
  Dense(const LayerSpec& spec, Matrix weight, RowVector bias);

  const LayerSpec& spec() const { return spec_; }
  int in_dim() const { return spec_.in; }
  int out_dim() const { return spec_.out; }

  /// Training forward pass; keeps what backward() needs.
  Matrix forward(const Matrix& x);
  /// Stateless evaluation.
  Matrix infer(const Matrix& x) const;

  /// Accumulates dL/dW and dL/db from dL/dy. Returns dL/dx unless
  /// `need_input_grad` is false, in which case the returned matrix is empty.
  Matrix backward(const Matrix& grad_out, bool need_input_grad = true);

  void zero_grad();
  void rmsprop(double lr, const RmsPropConfig& cfg = {});
  void sgd(double lr);
  void clear_trace() { traced_ = false; }

  Param& weight() { return weight_; }
  const Param& weight() const { return weight_; }
  Param& bias() { return bias_; }
  const Param& bias() const { return bias_; }
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  void check_input(const Matrix& x) const;

  LayerSpec spec_;
  Param weight_;
  Param bias_;
  Matrix input_;
  Matrix pre_;
  Matrix act_out_;
  bool traced_ = false;
};

/// Linear (or activated) projection onto label space plus a loss function.
class LossHead {
 public:
  LossHead() = default;
  LossHead(int in, int label_dim, LossKind kind, Rng& rng, Activation act = Activation::Identity);

  LossKind kind() const { return kind_; }
  Dense& layer() { return layer_; }
  const Dense& layer() const { return layer_; }

  Matrix predict(const Matrix& x) const { return layer_.infer(x); }

  /// Forward + loss + backward into the head's params. Returns the loss and,
  /// through `grad_in`, dL/dx when non-null.
  double forward_backward(const Matrix& x, const Matrix& label, Matrix* grad_in);

 private:
  Dense layer_;
  LossKind kind_ = LossKind::CrossEntropy;
};

}  // namespace cortexkit
