#pragma once

#include <vector>

#include "cortexkit/nncore.hpp"

namespace cortexkit {

struct LossWeights {
  double reconstruction = 1000.0;  // k1
  double engram_sparse = 0.01;     // k2
  double time_sparse = 10.0;       // k3
};

struct EngramConfig {
  int input_dim = 2;
  std::vector<int> encoder_widths{64, 64, 256, 256, 256};
  int neurons = 1000;
  double eta = 0.05;
  LossWeights weights{};
  double lambda_long = 0.9999;
  double lambda_short = 0.99;
  double long_share = 0.9;
  double short_share = 0.1;
  double lr = 1e-4;
};

inline constexpr double kEmaClampLo = 1e-4;
inline constexpr double kEmaClampHi = 1.0 - 1e-4;

/// Exponential moving average of per-neuron activation.
class EmaTracker {
 public:
  EmaTracker() = default;
  EmaTracker(int neurons, double lambda, double init);

  /// avg <- avg * lambda + (1 - lambda) * mean_h
  void update(const RowVector& mean_h);
  /// avg clamped to [1e-4, 1 - 1e-4].
  RowVector clamped() const;

  double lambda() const { return lambda_; }
  const RowVector& average() const { return avg_; }
  RowVector& average() { return avg_; }

 private:
  RowVector avg_;
  double lambda_ = 0.99;
};

struct LossComponents {
  double reconstruction = 0.0;
  double engram_sparse = 0.0;
  double time_sparse = 0.0;  // combined long/short term
  double total = 0.0;
};

/// Mean over batch and dims of the squared coordinate error.
double loss_reconstruction(const Matrix& input, const Matrix& output);
Matrix loss_reconstruction_grad(const Matrix& input, const Matrix& output);

/// Batch mean of |sum h^2 - eta N| + |sum (1-h)^2 - N (1-eta)|.
double loss_engram_sparse(const Matrix& h, double eta);
Matrix loss_engram_sparse_grad(const Matrix& h, double eta);

/// Batch mean of (1/N) sum_i (-eta/avg_i + (1-eta)/(1-avg_i)) h_i. `avg` is a constant.
double loss_time_sparse(const Matrix& h, const RowVector& avg, double eta);
Matrix loss_time_sparse_grad(const Matrix& h, const RowVector& avg, double eta);

double total_loss(double reconstruction, double engram_sparse, double time_sparse,
                  const LossWeights& w);

/// Encoder stack -> sigmoid engram layer -> linear mapping matrix M [N x input_dim].
class EngramAE {
 public:
  EngramAE() = default;
  EngramAE(const EngramConfig& cfg, Rng& rng);

  const EngramConfig& config() const { return cfg_; }
  int neurons() const { return cfg_.neurons; }

  Matrix encode(const Matrix& x) const;
  Matrix decode(const Matrix& h) const;
  Matrix reconstruct(const Matrix& x) const { return decode(encode(x)); }

  /// Loss of a batch against the current (clamped) trackers; no state change.
  LossComponents evaluate(const Matrix& x) const;

  /// Forward, tracker update, losses, backward and one RMSprop step.
  LossComponents train_step(const Matrix& x);

  /// Zeroes and fills parameter gradients for `x`. When `update_trackers` is
  /// false the trackers are used as constants.
  LossComponents compute_gradients(const Matrix& x, bool update_trackers);

  /// Split form of compute_gradients() for models that wrap the autoencoder.
  /// forward_train() zeroes gradients, records the pass, updates the trackers
  /// (if asked) and returns the reconstruction. backward_train() computes the
  /// losses on the recorded pass, adds `extra_output_grad` (an outer
  /// dL/d(output)) and, when `grad_input` is non-null, writes dL/dx including
  /// the path through x as the reconstruction target.
  Matrix forward_train(const Matrix& x, bool update_trackers);
  LossComponents backward_train(const Matrix* extra_output_grad, Matrix* grad_input);

  void apply_rmsprop(double lr);

  std::vector<Dense>& encoder() { return encoder_; }
  const std::vector<Dense>& encoder() const { return encoder_; }
  Dense& engram_layer() { return engram_; }
  const Dense& engram_layer() const { return engram_; }
  /// Mapping matrix M, [N x input_dim].
  Param& mapping() { return mapping_.weight(); }
  const Param& mapping() const { return mapping_.weight(); }
  EmaTracker& long_tracker() { return long_; }
  const EmaTracker& long_tracker() const { return long_; }
  EmaTracker& short_tracker() { return short_; }
  const EmaTracker& short_tracker() const { return short_; }

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

 private:
  double combined_time_sparse(const Matrix& h, Matrix* grad) const;

  EngramConfig cfg_;
  std::vector<Dense> encoder_;
  Dense engram_;
  Dense mapping_;
  EmaTracker long_;
  EmaTracker short_;
  Matrix trace_x_;
  Matrix trace_h_;
  Matrix trace_out_;
  bool traced_ = false;
};

// ---------------------------------------------------------------------------
// Analysis

struct SparsityStats {
  double frac_inhibited = 0.0;  // h < 0.01
  double frac_mid = 0.0;        // 0.01 <= h <= 0.99
  double frac_extreme = 0.0;    // h > 0.99
};

SparsityStats sparsity_statistics(const EngramAE& ae, const Matrix& locations);
SparsityStats sparsity_statistics(const Matrix& activations);

/// Regular n x n grid over [0,1]^2, row-major in y then x.
Matrix location_grid(int n);

/// Engram activations over an n x n grid, [n^2 x N].
Matrix grid_response(const EngramAE& ae, int n);

struct PlaceField {
  int neuron = 0;
  int n = 0;
  std::vector<double> values;  // row-major in y then x
  double peak = 0.0;
  Point2 peak_at{};
  Point2 centroid{};
};

PlaceField place_field(const EngramAE& ae, int neuron, int grid_n = 101);
/// Same as above, reusing a precomputed grid_response().
PlaceField place_field(const Matrix& response, int grid_n, int neuron);

/// Rows of M rescaled by eta * N, the expected number of simultaneously
/// active engram cells, so they live in the input coordinate frame.
Matrix characteristic_locations(const EngramAE& ae);

/// bins x bins histogram over [0,1]^2, normalized to unit mass over the
/// points that fall inside the square. Row index is y, column index is x.
Matrix density_heatmap(const Matrix& points, int bins = 25);

/// Fraction of bright neurons (peak > 0.99) whose activation-weighted
/// centroid lies within `radius` of their characteristic location.
struct PlaceFieldConsistency {
  int bright = 0;
  int consistent = 0;
  double fraction() const { return bright == 0 ? 0.0 : static_cast<double>(consistent) / bright; }
};

PlaceFieldConsistency place_field_consistency(const EngramAE& ae, int grid_n = 101,
                                              double radius = 0.15);

// ---------------------------------------------------------------------------
// MNIST joint model

struct MnistAEConfig {
  int image_dim = 784;
  std::vector<int> encoder_widths{256, 256, 256, 128};
  std::vector<int> decoder_widths{256, 256, 256};  // a final Sigmoid layer back to image_dim follows
  double image_loss_weight = 100.0;
};

struct JointLoss {
  double image = 0.0;  // Loss_MnistAE
  LossComponents engram;
  double total = 0.0;  // image_loss_weight * image + engram.total
};

/// Image autoencoder whose code passes through an EngramAE; the decoder reads
/// the average of the EngramAE's input and output.
class MnistJointModel {
 public:
  MnistJointModel(const MnistAEConfig& mcfg, EngramConfig ecfg, Rng& rng);

  struct Forward {
    Matrix code;
    Matrix h;
    Matrix engram_out;
    Matrix reconstruction;
  };

  Forward forward(const Matrix& images) const;
  JointLoss evaluate(const Matrix& images) const;
  JointLoss compute_gradients(const Matrix& images, bool update_trackers);
  JointLoss train_step(const Matrix& images, double lr);

  EngramAE& engram() { return engram_; }
  const EngramAE& engram() const { return engram_; }
  std::vector<Param*> params();

 private:
  MnistAEConfig mcfg_;
  std::vector<Dense> encoder_;
  std::vector<Dense> decoder_;
  EngramAE engram_;
};

/// 100 * image + engram.total.
double joint_total(double image_loss, double engram_total, double image_weight = 100.0);

}  // namespace cortexkit
