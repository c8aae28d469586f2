#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cortexkit/nncore.hpp"

namespace cortexkit {

struct ModuleConfig {
  int in = 0;
  int out = 0;
  Activation act = Activation::Identity;
  bool shortcut = false;
  int label_dim = 0;
  LossKind loss = LossKind::CrossEntropy;
};

/// Outcome of one local update. `output` is the forwarded signal computed
/// with the parameters as they were before the update.
struct LocalStep {
  double loss = 0.0;
  double accuracy = 0.0;
  Matrix output;
};

/// One locally supervised block: a nonlinear layer (optionally with an
/// identity shortcut) whose output copy feeds a private linear loss head.
/// Gradients never leave the module; the input is treated as a constant.
class LwbpModule {
 public:
  LwbpModule(const ModuleConfig& cfg, Rng& rng);
  LwbpModule(const ModuleConfig& cfg, Dense main, LossHead head);

  const ModuleConfig& config() const { return cfg_; }

  Matrix forward(const Matrix& x) const;
  /// Loss-head logits on the module output for input x.
  Matrix head_logits(const Matrix& x) const;

  LocalStep local_update(const Matrix& x, const Matrix& label, double lr,
                         const RmsPropConfig& opt = {});

  Dense& main() { return main_; }
  const Dense& main() const { return main_; }
  LossHead& head() { return head_; }
  const LossHead& head() const { return head_; }

  /// main W, main b, head W, head b.
  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  ModuleConfig cfg_;
  Dense main_;
  LossHead head_;
};

struct ModuleMetrics {
  std::vector<double> loss;
  std::vector<double> accuracy;
};

struct NetworkConfig {
  int input_dim = 2;
  int width = 16;
  int modules = 5;
  int label_dim = 2;
  Activation act = Activation::LeakyRelu;
  bool shortcut = true;
  LossKind loss = LossKind::CrossEntropy;
};

/// Top-1 accuracy of logits against one-hot (or soft) labels, lowest index wins ties.
double top1_accuracy(const Matrix& logits, const Matrix& labels);

class LwbpNetwork {
 public:
  LwbpNetwork() = default;
  explicit LwbpNetwork(std::vector<LwbpModule> modules);
  /// First module: Identity, no shortcut, input_dim -> width. The rest use
  /// cfg.act and cfg.shortcut at constant width.
  LwbpNetwork(const NetworkConfig& cfg, Rng& rng);

  std::size_t size() const { return modules_.size(); }
  LwbpModule& module(std::size_t k) { return modules_.at(k); }
  const LwbpModule& module(std::size_t k) const { return modules_.at(k); }
  std::vector<LwbpModule>& modules() { return modules_; }

  /// Sequential pass: each module updates on the activation handed down from
  /// its predecessor's pre-update forward pass. `enabled`, when given, masks
  /// which modules apply their update (disabled ones still forward).
  ModuleMetrics train_step(const Matrix& batch, const Matrix& labels, double lr,
                           const std::vector<bool>* enabled = nullptr,
                           const RmsPropConfig& opt = {});

  std::vector<Matrix> module_outputs(const Matrix& x) const;
  std::vector<Matrix> module_logits(const Matrix& x) const;

  /// Per-module top-1 accuracy over the dataset, evaluated in chunks.
  std::vector<double> layerwise_accuracy(const Matrix& x, const Matrix& labels,
                                         Eigen::Index chunk = 4096) const;

 private:
  std::vector<LwbpModule> modules_;
};

/// End-to-end backprop baseline: same layer stack plus one linear head at the end.
class BpNetwork {
 public:
  BpNetwork(const NetworkConfig& cfg, Rng& rng);
  BpNetwork(std::vector<Dense> layers, LossHead head);

  double train_step(const Matrix& batch, const Matrix& labels, double lr,
                    const RmsPropConfig& opt = {});

  /// Computes gradients for one batch without stepping. Returns the loss.
  double compute_gradients(const Matrix& batch, const Matrix& labels);
  double loss(const Matrix& batch, const Matrix& labels) const;

  Matrix logits(const Matrix& x) const;
  double accuracy(const Matrix& x, const Matrix& labels, Eigen::Index chunk = 4096) const;

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }
  LossHead& head() { return head_; }
  const LossHead& head() const { return head_; }
  std::vector<Param*> params();

 private:
  std::vector<Dense> layers_;
  LossHead head_;
};

/// argmax class of every module over an n x n grid spanning [0,1]^2.
/// Cell (row i, col j) holds the point (x = j/(n-1), y = i/(n-1)).
struct ClassMap {
  int n = 0;
  std::vector<std::uint8_t> cls;

  std::uint8_t at(int row, int col) const { return cls[static_cast<std::size_t>(row * n + col)]; }
};

std::vector<ClassMap> predict_class_map(const LwbpNetwork& net, int grid_n);

/// Fraction of cells where the map agrees with `labeler(x, y)`.
double grid_accuracy(const ClassMap& map, const std::function<int(double, double)>& labeler);

/// Fraction of cells whose class differs between two maps.
double map_difference(const ClassMap& a, const ClassMap& b);

}  // namespace cortexkit
