#pragma once

#include <vector>

#include "cortexkit/nncore.hpp"

namespace cortexkit {

/// Which tanh-derivative factor the pyramidal updates use. Consistent uses
/// 1 - (Output - Input)^2, the derivative of the tanh branch; PaperLiteral
/// uses 1 - Output^2 as printed in the original update rule.
enum class BioGradientMode { Consistent, PaperLiteral };

BioGradientMode parse_gradient_mode(const std::string& name);
std::string to_string(BioGradientMode mode);

struct BioModuleConfig {
  int in = 900;
  int width = 900;         // D pyramidal neurons
  int loss_neurons = 10;   // K
  /// Output = Input + tanh(Input W + b) when true; Output = Input W + b otherwise
  /// (the dimension-changing first module).
  bool shortcut = true;
  double alpha_init = 1.0;
};

struct BioForwardTrace {
  Matrix input;     // [B x in]
  Matrix branch;    // tanh(Input W + b) or the linear map for the first module
  Matrix output;    // [B x D]
  Matrix out_mean;  // [B x K]
  Matrix pred;      // [B x K]
};

/// Parameter changes for one batch (already multiplied by the learning rate).
struct BioDeltas {
  Matrix weight;        // [in x D]
  RowVector bias;       // [D]
  RowVector alpha;      // [K]
  RowVector pred_bias;  // [K]
};

/// sum_k (label_k - pred_k)^2 / K, averaged over the batch.
double bio_loss(const Matrix& pred, const Matrix& label);

/// Pyramidal layer plus K loss neurons, each reading the mean of its own
/// contiguous block of rho = D/K pyramidal outputs.
class BioModule {
 public:
  BioModule(const BioModuleConfig& cfg, Rng& rng);

  const BioModuleConfig& config() const { return cfg_; }
  int rho() const { return cfg_.width / cfg_.loss_neurons; }
  /// Loss neuron owning pyramidal neuron j.
  int owner(int j) const { return j / rho(); }

  BioForwardTrace forward(const Matrix& input) const;

  /// Closed-form neuron-level updates, batch-averaged.
  BioDeltas deltas(const BioForwardTrace& trace, const Matrix& label, double lr,
                   BioGradientMode mode = BioGradientMode::Consistent) const;

  void apply(const BioDeltas& d);
  /// Routes -delta/lr through RMSprop instead of adding the delta.
  void apply_rmsprop(const BioDeltas& d, double lr);

  Param& weight() { return weight_; }
  const Param& weight() const { return weight_; }
  Param& bias() { return bias_; }
  const Param& bias() const { return bias_; }
  Param& alpha() { return alpha_; }
  const Param& alpha() const { return alpha_; }
  Param& pred_bias() { return pred_bias_; }
  const Param& pred_bias() const { return pred_bias_; }

 private:
  BioModuleConfig cfg_;
  Param weight_;
  Param bias_;
  Param alpha_;
  Param pred_bias_;
};

struct BioTrainOptions {
  double lr = 0.01;
  BioGradientMode mode = BioGradientMode::Consistent;
  bool use_rmsprop = false;
};

struct BioStep {
  std::vector<double> loss;
  std::vector<double> accuracy;
};

/// Stack of bio modules trained layer by layer; each module learns on the
/// pre-update output of its predecessor.
class BioNetwork {
 public:
  /// First module: input_dim -> width without tanh or shortcut; the rest are
  /// shortcut modules of constant width.
  BioNetwork(int input_dim, int width, int loss_neurons, int modules, Rng& rng);

  std::size_t size() const { return modules_.size(); }
  BioModule& module(std::size_t k) { return modules_.at(k); }
  const BioModule& module(std::size_t k) const { return modules_.at(k); }

  BioStep train_step(const Matrix& batch, const Matrix& labels, const BioTrainOptions& opt);
  std::vector<Matrix> predictions(const Matrix& x) const;
  std::vector<double> layerwise_accuracy(const Matrix& x, const Matrix& labels,
                                         Eigen::Index chunk = 2048) const;

 private:
  std::vector<BioModule> modules_;
};

}  // namespace cortexkit
