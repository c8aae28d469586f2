#include "cortexkit/engram.hpp"

#include <algorithm>
#include <cmath>

namespace cortexkit {

namespace {

constexpr Eigen::Index kChunk = 4096;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_same(const Matrix& a, const Matrix& b, const char* what) {
  require_dims(a.rows() == b.rows() && a.cols() == b.cols(),
               std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
  require_dims(a.rows() > 0, std::string(what) + ": empty batch");
}

RowVector time_coefficients(const RowVector& avg, double eta) {
  return (-eta / avg.array() + (1.0 - eta) / (1.0 - avg.array())).matrix();
}

template <typename Fn>
Matrix encode_chunked(const EngramAE& ae, const Matrix& x, Fn&& consume) {
  Matrix last;
  for (Eigen::Index start = 0; start < x.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, x.rows() - start);
    last = ae.encode(x.middleRows(start, len));
    consume(start, last);
  }
  return last;
}

}  // namespace

EmaTracker::EmaTracker(int neurons, double lambda, double init)
    : avg_(RowVector::Constant(neurons, init)), lambda_(lambda) {}

void EmaTracker::update(const RowVector& mean_h) {
  require_dims(mean_h.size() == avg_.size(), "EmaTracker::update: size mismatch");
  avg_ = avg_ * lambda_ + (1.0 - lambda_) * mean_h;
}

RowVector EmaTracker::clamped() const {
  return avg_.array().max(kEmaClampLo).min(kEmaClampHi).matrix();
}

double loss_reconstruction(const Matrix& input, const Matrix& output) {
  check_same(input, output, "loss_reconstruction");
  return (input - output).squaredNorm() / static_cast<double>(input.size());
}

Matrix loss_reconstruction_grad(const Matrix& input, const Matrix& output) {
  check_same(input, output, "loss_reconstruction_grad");
  return 2.0 * (output - input) / static_cast<double>(input.size());
}

double loss_engram_sparse(const Matrix& h, double eta) {
  require_dims(h.rows() > 0, "loss_engram_sparse: empty batch");
  const auto n = static_cast<double>(h.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double on = h.row(r).squaredNorm();
    const double off = (1.0 - h.row(r).array()).square().sum();
    total += std::abs(on - eta * n) + std::abs(off - n * (1.0 - eta));
  }
  return total / static_cast<double>(h.rows());
}

Matrix loss_engram_sparse_grad(const Matrix& h, double eta) {
  require_dims(h.rows() > 0, "loss_engram_sparse_grad: empty batch");
  const auto n = static_cast<double>(h.cols());
  const auto batch = static_cast<double>(h.rows());
  Matrix g(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    const double s_on = sign(h.row(r).squaredNorm() - eta * n);
    const double s_off = sign((1.0 - h.row(r).array()).square().sum() - n * (1.0 - eta));
    g.row(r) = (2.0 * s_on * h.row(r).array() - 2.0 * s_off * (1.0 - h.row(r).array())) / batch;
  }
  return g;
}

double loss_time_sparse(const Matrix& h, const RowVector& avg, double eta) {
  require_dims(h.cols() == avg.size(), "loss_time_sparse: tracker size mismatch");
  require_dims(h.rows() > 0, "loss_time_sparse: empty batch");
  const RowVector coeff = time_coefficients(avg, eta);
  return (h * coeff.transpose()).sum() /
         (static_cast<double>(h.cols()) * static_cast<double>(h.rows()));
}

Matrix loss_time_sparse_grad(const Matrix& h, const RowVector& avg, double eta) {
  require_dims(h.cols() == avg.size(), "loss_time_sparse_grad: tracker size mismatch");
  const RowVector coeff =
      time_coefficients(avg, eta) / (static_cast<double>(h.cols()) * static_cast<double>(h.rows()));
  Matrix g(h.rows(), h.cols());
  g.rowwise() = coeff;
  return g;
}

double total_loss(double reconstruction, double engram_sparse, double time_sparse,
                  const LossWeights& w) {
  return w.reconstruction * reconstruction + w.engram_sparse * engram_sparse +
         w.time_sparse * time_sparse;
}

EngramAE::EngramAE(const EngramConfig& cfg, Rng& rng) : cfg_(cfg) {
  require_dims(cfg.input_dim > 0 && cfg.neurons > 0, "EngramAE: dimensions must be positive");
  if (!(cfg.eta > 0.0 && cfg.eta < 1.0)) throw std::invalid_argument("EngramAE: eta must be in (0,1)");
  int width = cfg.input_dim;
  for (int w : cfg.encoder_widths) {
    encoder_.emplace_back(LayerSpec{width, w, Activation::LeakyRelu, false, true}, rng);
    width = w;
  }
  engram_ = Dense(LayerSpec{width, cfg.neurons, Activation::Sigmoid, false, true}, rng);
  mapping_ = Dense(LayerSpec{cfg.neurons, cfg.input_dim, Activation::Identity, false, false}, rng);
  long_ = EmaTracker(cfg.neurons, cfg.lambda_long, cfg.eta);
  short_ = EmaTracker(cfg.neurons, cfg.lambda_short, cfg.eta);
}

Matrix EngramAE::encode(const Matrix& x) const {
  require_dims(x.cols() == cfg_.input_dim,
               "EngramAE::encode: expected " + std::to_string(cfg_.input_dim) + " inputs, got " +
                   shape_str(x));
  Matrix s = x;
  for (const auto& layer : encoder_) s = layer.infer(s);
  return engram_.infer(s);
}

Matrix EngramAE::decode(const Matrix& h) const {
  require_dims(h.cols() == cfg_.neurons, "EngramAE::decode: expected " +
                                             std::to_string(cfg_.neurons) + " activations");
  return h * mapping_.weight().value;
}

double EngramAE::combined_time_sparse(const Matrix& h, Matrix* grad) const {
  const RowVector lavg = long_.clamped();
  const RowVector savg = short_.clamped();
  if (grad) {
    *grad = cfg_.long_share * loss_time_sparse_grad(h, lavg, cfg_.eta) +
            cfg_.short_share * loss_time_sparse_grad(h, savg, cfg_.eta);
  }
  return cfg_.long_share * loss_time_sparse(h, lavg, cfg_.eta) +
         cfg_.short_share * loss_time_sparse(h, savg, cfg_.eta);
}

LossComponents EngramAE::evaluate(const Matrix& x) const {
  const Matrix h = encode(x);
  const Matrix out = decode(h);
  LossComponents c;
  c.reconstruction = loss_reconstruction(x, out);
  c.engram_sparse = loss_engram_sparse(h, cfg_.eta);
  c.time_sparse = combined_time_sparse(h, nullptr);
  c.total = total_loss(c.reconstruction, c.engram_sparse, c.time_sparse, cfg_.weights);
  return c;
}

Matrix EngramAE::forward_train(const Matrix& x, bool update_trackers) {
  require_dims(x.cols() == cfg_.input_dim, "EngramAE: input " + shape_str(x) + " has wrong width");
  for (auto* p : params()) p->zero_grad();
  Matrix s = x;
  for (auto& layer : encoder_) s = layer.forward(s);
  trace_h_ = engram_.forward(s);
  trace_out_ = mapping_.forward(trace_h_);
  trace_x_ = x;
  traced_ = true;
  if (update_trackers) {
    const RowVector mean_h = trace_h_.colwise().mean();
    long_.update(mean_h);
    short_.update(mean_h);
  }
  return trace_out_;
}

LossComponents EngramAE::backward_train(const Matrix* extra_output_grad, Matrix* grad_input) {
  if (!traced_) throw StateError("EngramAE::backward_train without forward_train");
  traced_ = false;
  const auto& w = cfg_.weights;
  LossComponents c;
  c.reconstruction = loss_reconstruction(trace_x_, trace_out_);
  c.engram_sparse = loss_engram_sparse(trace_h_, cfg_.eta);
  Matrix g_time;
  c.time_sparse = combined_time_sparse(trace_h_, &g_time);
  c.total = total_loss(c.reconstruction, c.engram_sparse, c.time_sparse, w);

  const Matrix g_recon = w.reconstruction * loss_reconstruction_grad(trace_x_, trace_out_);
  Matrix g_out = g_recon;
  if (extra_output_grad) {
    require_dims(extra_output_grad->rows() == g_out.rows() && extra_output_grad->cols() == g_out.cols(),
                 "EngramAE: external output gradient has wrong shape");
    g_out += *extra_output_grad;
  }
  Matrix g_h = mapping_.backward(g_out);
  g_h += w.engram_sparse * loss_engram_sparse_grad(trace_h_, cfg_.eta);
  g_h += w.time_sparse * g_time;
  Matrix g = engram_.backward(g_h);
  for (std::size_t k = encoder_.size(); k-- > 0;) {
    g = encoder_[k].backward(g, k > 0 || grad_input != nullptr);
  }
  if (grad_input) {
    *grad_input = g - g_recon;  // x is also the reconstruction target
  }
  for (auto& layer : encoder_) layer.clear_trace();
  engram_.clear_trace();
  mapping_.clear_trace();
  return c;
}

LossComponents EngramAE::compute_gradients(const Matrix& x, bool update_trackers) {
  forward_train(x, update_trackers);
  return backward_train(nullptr, nullptr);
}

void EngramAE::apply_rmsprop(double lr) {
  for (auto& layer : encoder_) layer.rmsprop(lr);
  engram_.rmsprop(lr);
  mapping_.rmsprop(lr);
}

LossComponents EngramAE::train_step(const Matrix& x) {
  const LossComponents c = compute_gradients(x, true);
  apply_rmsprop(cfg_.lr);
  return c;
}

std::vector<Param*> EngramAE::params() {
  std::vector<Param*> out;
  for (auto& layer : encoder_) {
    out.push_back(&layer.weight());
    out.push_back(&layer.bias());
  }
  out.push_back(&engram_.weight());
  out.push_back(&engram_.bias());
  out.push_back(&mapping_.weight());
  return out;
}

std::vector<const Param*> EngramAE::params() const {
  std::vector<const Param*> out;
  for (const auto& layer : encoder_) {
    out.push_back(&layer.weight());
    out.push_back(&layer.bias());
  }
  out.push_back(&engram_.weight());
  out.push_back(&engram_.bias());
  out.push_back(&mapping_.weight());
  return out;
}

// ---------------------------------------------------------------------------

SparsityStats sparsity_statistics(const Matrix& activations) {
  if (activations.size() == 0) throw std::invalid_argument("sparsity_statistics: no activations");
  std::size_t low = 0;
  std::size_t high = 0;
  for (Eigen::Index i = 0; i < activations.size(); ++i) {
    const double v = activations.data()[i];
    if (v < 0.01) {
      ++low;
    } else if (v > 0.99) {
      ++high;
    }
  }
  const auto total = static_cast<double>(activations.size());
  SparsityStats s;
  s.frac_inhibited = static_cast<double>(low) / total;
  s.frac_extreme = static_cast<double>(high) / total;
  s.frac_mid = static_cast<double>(static_cast<std::size_t>(activations.size()) - low - high) / total;
  return s;
}

SparsityStats sparsity_statistics(const EngramAE& ae, const Matrix& locations) {
  if (locations.rows() == 0) throw std::invalid_argument("sparsity_statistics: no locations");
  std::size_t low = 0;
  std::size_t high = 0;
  std::size_t total = 0;
  encode_chunked(ae, locations, [&](Eigen::Index, const Matrix& h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      const double v = h.data()[i];
      if (v < 0.01) {
        ++low;
      } else if (v > 0.99) {
        ++high;
      }
    }
    total += static_cast<std::size_t>(h.size());
  });
  SparsityStats s;
  s.frac_inhibited = static_cast<double>(low) / static_cast<double>(total);
  s.frac_extreme = static_cast<double>(high) / static_cast<double>(total);
  s.frac_mid = static_cast<double>(total - low - high) / static_cast<double>(total);
  return s;
}

Matrix location_grid(int n) {
  if (n < 2) throw std::invalid_argument("location_grid: n must be >= 2");
  const auto span = static_cast<double>(n - 1);
  Matrix g(static_cast<Eigen::Index>(n) * n, 2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * n + j;
      g(r, 0) = static_cast<double>(j) / span;
      g(r, 1) = static_cast<double>(i) / span;
    }
  }
  return g;
}

Matrix grid_response(const EngramAE& ae, int n) {
  if (ae.config().input_dim != 2) throw DimensionError("grid_response: needs a 2-D input model");
  const Matrix grid = location_grid(n);
  Matrix out(grid.rows(), ae.neurons());
  encode_chunked(ae, grid, [&](Eigen::Index start, const Matrix& h) {
    out.middleRows(start, h.rows()) = h;
  });
  return out;
}

PlaceField place_field(const Matrix& response, int grid_n, int neuron) {
  if (neuron < 0 || neuron >= response.cols()) {
    throw std::out_of_range("place_field: neuron " + std::to_string(neuron) + " out of range");
  }
  require_dims(response.rows() == static_cast<Eigen::Index>(grid_n) * grid_n,
               "place_field: response does not match grid size");
  PlaceField pf;
  pf.neuron = neuron;
  pf.n = grid_n;
  pf.values.resize(static_cast<std::size_t>(response.rows()));
  const auto span = static_cast<double>(grid_n - 1);
  double mass = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Eigen::Index best = 0;
  for (Eigen::Index r = 0; r < response.rows(); ++r) {
    const double v = response(r, neuron);
    pf.values[static_cast<std::size_t>(r)] = v;
    if (v > response(best, neuron)) best = r;
    const double x = static_cast<double>(r % grid_n) / span;
    const double y = static_cast<double>(r / grid_n) / span;
    mass += v;
    cx += v * x;
    cy += v * y;
  }
  pf.peak = response(best, neuron);
  pf.peak_at = {static_cast<double>(best % grid_n) / span, static_cast<double>(best / grid_n) / span};
  pf.centroid = mass > 0.0 ? Point2{cx / mass, cy / mass} : Point2{0.5, 0.5};
  return pf;
}

PlaceField place_field(const EngramAE& ae, int neuron, int grid_n) {
  if (neuron < 0 || neuron >= ae.neurons()) {
    throw std::out_of_range("place_field: neuron " + std::to_string(neuron) + " out of range");
  }
  return place_field(grid_response(ae, grid_n), grid_n, neuron);
}

Matrix characteristic_locations(const EngramAE& ae) {
  const double scale = ae.config().eta * static_cast<double>(ae.neurons());
  return ae.mapping().value * scale;
}

Matrix density_heatmap(const Matrix& points, int bins) {
  if (bins < 1) throw std::invalid_argument("density_heatmap: bins must be positive");
  require_dims(points.cols() == 2, "density_heatmap: points must be [n x 2]");
  Matrix hist = Matrix::Zero(bins, bins);
  double inside = 0.0;
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const double x = points(r, 0);
    const double y = points(r, 1);
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) continue;
    const int bx = std::min(bins - 1, static_cast<int>(x * bins));
    const int by = std::min(bins - 1, static_cast<int>(y * bins));
    hist(by, bx) += 1.0;
    inside += 1.0;
  }
  if (inside > 0.0) hist /= inside;
  return hist;
}

PlaceFieldConsistency place_field_consistency(const EngramAE& ae, int grid_n, double radius) {
  const Matrix response = grid_response(ae, grid_n);
  const Matrix loc = characteristic_locations(ae);
  PlaceFieldConsistency out;
  for (int i = 0; i < ae.neurons(); ++i) {
    const PlaceField pf = place_field(response, grid_n, i);
    if (pf.peak <= 0.99) continue;
    ++out.bright;
    if (distance(pf.centroid, Point2{loc(i, 0), loc(i, 1)}) <= radius) ++out.consistent;
  }
  return out;
}

// ---------------------------------------------------------------------------

double joint_total(double image_loss, double engram_total, double image_weight) {
  return image_weight * image_loss + engram_total;
}

MnistJointModel::MnistJointModel(const MnistAEConfig& mcfg, EngramConfig ecfg, Rng& rng)
    : mcfg_(mcfg) {
  require_dims(!mcfg.encoder_widths.empty(), "MnistJointModel: encoder needs at least one layer");
  int width = mcfg.image_dim;
  for (int w : mcfg.encoder_widths) {
    encoder_.emplace_back(LayerSpec{width, w, Activation::LeakyRelu, false, true}, rng);
    width = w;
  }
  ecfg.input_dim = width;
  engram_ = EngramAE(ecfg, rng);
  for (int w : mcfg.decoder_widths) {
    decoder_.emplace_back(LayerSpec{width, w, Activation::LeakyRelu, false, true}, rng);
    width = w;
  }
  decoder_.emplace_back(LayerSpec{width, mcfg.image_dim, Activation::Sigmoid, false, true}, rng);
}

MnistJointModel::Forward MnistJointModel::forward(const Matrix& images) const {
  require_dims(images.cols() == mcfg_.image_dim,
               "MnistJointModel: expected " + std::to_string(mcfg_.image_dim) + " pixels, got " +
                   shape_str(images));
  Forward f;
  f.code = images;
  for (const auto& layer : encoder_) f.code = layer.infer(f.code);
  f.h = engram_.encode(f.code);
  f.engram_out = engram_.decode(f.h);
  Matrix s = 0.5 * (f.code + f.engram_out);
  for (const auto& layer : decoder_) s = layer.infer(s);
  f.reconstruction = std::move(s);
  return f;
}

JointLoss MnistJointModel::evaluate(const Matrix& images) const {
  const Forward f = forward(images);
  JointLoss out;
  out.image = (images - f.reconstruction).squaredNorm() / static_cast<double>(images.size());
  out.engram = engram_.evaluate(f.code);
  out.total = joint_total(out.image, out.engram.total, mcfg_.image_loss_weight);
  return out;
}

JointLoss MnistJointModel::compute_gradients(const Matrix& images, bool update_trackers) {
  require_dims(images.cols() == mcfg_.image_dim, "MnistJointModel: wrong image width");
  for (auto& l : encoder_) l.zero_grad();
  for (auto& l : decoder_) l.zero_grad();
  Matrix code = images;
  for (auto& layer : encoder_) code = layer.forward(code);
  const Matrix engram_out = engram_.forward_train(code, update_trackers);
  Matrix s = 0.5 * (code + engram_out);
  for (auto& layer : decoder_) s = layer.forward(s);

  JointLoss out;
  out.image = (images - s).squaredNorm() / static_cast<double>(images.size());
  Matrix g = mcfg_.image_loss_weight * 2.0 * (s - images) / static_cast<double>(images.size());
  for (std::size_t k = decoder_.size(); k-- > 0;) g = decoder_[k].backward(g);
  const Matrix g_mid = 0.5 * g;
  Matrix g_code;
  out.engram = engram_.backward_train(&g_mid, &g_code);
  g_code += g_mid;
  for (std::size_t k = encoder_.size(); k-- > 0;) g_code = encoder_[k].backward(g_code, k > 0);
  for (auto& l : encoder_) l.clear_trace();
  for (auto& l : decoder_) l.clear_trace();
  out.total = joint_total(out.image, out.engram.total, mcfg_.image_loss_weight);
  return out;
}

JointLoss MnistJointModel::train_step(const Matrix& images, double lr) {
  const JointLoss loss = compute_gradients(images, true);
  for (auto& l : encoder_) l.rmsprop(lr);
  engram_.apply_rmsprop(lr);
  for (auto& l : decoder_) l.rmsprop(lr);
  return loss;
}

std::vector<Param*> MnistJointModel::params() {
  std::vector<Param*> out;
  for (auto& l : encoder_) {
    for (auto* p : l.params()) out.push_back(p);
  }
  for (auto* p : engram_.params()) out.push_back(p);
  for (auto& l : decoder_) {
    for (auto* p : l.params()) out.push_back(p);
  }
  return out;
}

}  // namespace cortexkit
