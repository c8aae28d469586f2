#include "cortexkit/lwbp.hpp"

#include <algorithm>

namespace cortexkit {

namespace {

LayerSpec main_spec(const ModuleConfig& cfg) {
  return LayerSpec{cfg.in, cfg.out, cfg.act, cfg.shortcut, true};
}

void check_module(const ModuleConfig& cfg) {
  require_dims(!cfg.shortcut || cfg.in == cfg.out, "LwbpModule: shortcut requires in == out");
  require_dims(cfg.label_dim > 0, "LwbpModule: label_dim must be positive");
}

}  // namespace

LwbpModule::LwbpModule(const ModuleConfig& cfg, Rng& rng) : cfg_(cfg) {
  check_module(cfg);
  main_ = Dense(main_spec(cfg), rng);
  head_ = LossHead(cfg.out, cfg.label_dim, cfg.loss, rng);
}

LwbpModule::LwbpModule(const ModuleConfig& cfg, Dense main, LossHead head)
    : cfg_(cfg), main_(std::move(main)), head_(std::move(head)) {
  check_module(cfg);
  require_dims(main_.in_dim() == cfg.in && main_.out_dim() == cfg.out,
               "LwbpModule: main layer does not match config");
  require_dims(head_.layer().in_dim() == cfg.out && head_.layer().out_dim() == cfg.label_dim,
               "LwbpModule: loss head does not match config");
}

Matrix LwbpModule::forward(const Matrix& x) const { return main_.infer(x); }

Matrix LwbpModule::head_logits(const Matrix& x) const { return head_.predict(main_.infer(x)); }

LocalStep LwbpModule::local_update(const Matrix& x, const Matrix& label, double lr,
                                   const RmsPropConfig& opt) {
  require_dims(label.rows() == x.rows() && label.cols() == cfg_.label_dim,
               "local_update: label " + shape_str(label) + " for batch " + shape_str(x));
  main_.zero_grad();
  head_.layer().zero_grad();

  LocalStep step;
  step.output = main_.forward(x);
  Matrix grad_out;
  step.loss = head_.forward_backward(step.output, label, &grad_out);
  step.accuracy = top1_accuracy(head_.predict(step.output), label);
  // The module input is a constant: no gradient is produced for it.
  main_.backward(grad_out, /*need_input_grad=*/false);

  main_.rmsprop(lr, opt);
  head_.layer().rmsprop(lr, opt);
  main_.clear_trace();
  head_.layer().clear_trace();
  return step;
}

std::vector<Param*> LwbpModule::params() {
  return {&main_.weight(), &main_.bias(), &head_.layer().weight(), &head_.layer().bias()};
}

std::vector<const Param*> LwbpModule::params() const {
  return {&main_.weight(), &main_.bias(), &head_.layer().weight(), &head_.layer().bias()};
}

double top1_accuracy(const Matrix& logits, const Matrix& labels) {
  require_dims(logits.rows() == labels.rows() && logits.cols() == labels.cols(),
               "top1_accuracy: logits " + shape_str(logits) + " vs labels " + shape_str(labels));
  if (logits.rows() == 0) throw std::invalid_argument("top1_accuracy: empty dataset");
  const auto pred = argmax_rows(logits);
  const auto truth = argmax_rows(labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

LwbpNetwork::LwbpNetwork(std::vector<LwbpModule> modules) : modules_(std::move(modules)) {
  for (std::size_t k = 1; k < modules_.size(); ++k) {
    require_dims(modules_[k].config().in == modules_[k - 1].config().out,
                 "LwbpNetwork: module " + std::to_string(k) + " input width does not chain");
  }
}

LwbpNetwork::LwbpNetwork(const NetworkConfig& cfg, Rng& rng) {
  require_dims(cfg.modules >= 1, "LwbpNetwork: need at least one module");
  modules_.reserve(static_cast<std::size_t>(cfg.modules));
  modules_.emplace_back(
      ModuleConfig{cfg.input_dim, cfg.width, Activation::Identity, false, cfg.label_dim, cfg.loss},
      rng);
  for (int k = 1; k < cfg.modules; ++k) {
    modules_.emplace_back(
        ModuleConfig{cfg.width, cfg.width, cfg.act, cfg.shortcut, cfg.label_dim, cfg.loss}, rng);
  }
}

ModuleMetrics LwbpNetwork::train_step(const Matrix& batch, const Matrix& labels, double lr,
                                      const std::vector<bool>* enabled, const RmsPropConfig& opt) {
  if (enabled && enabled->size() != modules_.size()) {
    throw std::invalid_argument("train_step: enable mask size does not match module count");
  }
  ModuleMetrics metrics;
  metrics.loss.reserve(modules_.size());
  metrics.accuracy.reserve(modules_.size());
  Matrix signal = batch;
  for (std::size_t k = 0; k < modules_.size(); ++k) {
    if (enabled && !(*enabled)[k]) {
      const Matrix logits = modules_[k].head_logits(signal);
      metrics.loss.push_back(loss_value(logits, labels, modules_[k].config().loss));
      metrics.accuracy.push_back(top1_accuracy(logits, labels));
      signal = modules_[k].forward(signal);
      continue;
    }
    LocalStep step = modules_[k].local_update(signal, labels, lr, opt);
    metrics.loss.push_back(step.loss);
    metrics.accuracy.push_back(step.accuracy);
    signal = std::move(step.output);
  }
  return metrics;
}

std::vector<Matrix> LwbpNetwork::module_outputs(const Matrix& x) const {
  std::vector<Matrix> out;
  out.reserve(modules_.size());
  Matrix signal = x;
  for (const auto& m : modules_) {
    signal = m.forward(signal);
    out.push_back(signal);
  }
  return out;
}

std::vector<Matrix> LwbpNetwork::module_logits(const Matrix& x) const {
  std::vector<Matrix> out;
  out.reserve(modules_.size());
  Matrix signal = x;
  for (const auto& m : modules_) {
    signal = m.forward(signal);
    out.push_back(m.head().predict(signal));
  }
  return out;
}

std::vector<double> LwbpNetwork::layerwise_accuracy(const Matrix& x, const Matrix& labels,
                                                    Eigen::Index chunk) const {
  if (x.rows() == 0) throw std::invalid_argument("layerwise_accuracy: empty dataset");
  require_dims(x.rows() == labels.rows(), "layerwise_accuracy: sample/label count mismatch");
  std::vector<double> hits(modules_.size(), 0.0);
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    const auto logits = module_logits(x.middleRows(start, len));
    const Matrix lab = labels.middleRows(start, len);
    for (std::size_t k = 0; k < modules_.size(); ++k) {
      hits[k] += top1_accuracy(logits[k], lab) * static_cast<double>(len);
    }
  }
  for (auto& h : hits) h /= static_cast<double>(x.rows());
  return hits;
}

BpNetwork::BpNetwork(const NetworkConfig& cfg, Rng& rng) {
  require_dims(cfg.modules >= 1, "BpNetwork: need at least one layer");
  layers_.emplace_back(LayerSpec{cfg.input_dim, cfg.width, Activation::Identity, false, true}, rng);
  for (int k = 1; k < cfg.modules; ++k) {
    layers_.emplace_back(LayerSpec{cfg.width, cfg.width, cfg.act, cfg.shortcut, true}, rng);
  }
  head_ = LossHead(cfg.width, cfg.label_dim, cfg.loss, rng);
}

BpNetwork::BpNetwork(std::vector<Dense> layers, LossHead head)
    : layers_(std::move(layers)), head_(std::move(head)) {
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    require_dims(layers_[k].in_dim() == layers_[k - 1].out_dim(), "BpNetwork: widths do not chain");
  }
  require_dims(!layers_.empty() && head_.layer().in_dim() == layers_.back().out_dim(),
               "BpNetwork: head does not match last layer");
}

double BpNetwork::compute_gradients(const Matrix& batch, const Matrix& labels) {
  for (auto& l : layers_) l.zero_grad();
  head_.layer().zero_grad();
  Matrix signal = batch;
  for (auto& l : layers_) signal = l.forward(signal);
  Matrix grad;
  const double loss = head_.forward_backward(signal, labels, &grad);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    grad = layers_[k].backward(grad, k > 0);
  }
  return loss;
}

double BpNetwork::train_step(const Matrix& batch, const Matrix& labels, double lr,
                             const RmsPropConfig& opt) {
  const double loss = compute_gradients(batch, labels);
  for (auto& l : layers_) {
    l.rmsprop(lr, opt);
    l.clear_trace();
  }
  head_.layer().rmsprop(lr, opt);
  head_.layer().clear_trace();
  return loss;
}

double BpNetwork::loss(const Matrix& batch, const Matrix& labels) const {
  return loss_value(logits(batch), labels, head_.kind());
}

Matrix BpNetwork::logits(const Matrix& x) const {
  Matrix signal = x;
  for (const auto& l : layers_) signal = l.infer(signal);
  return head_.predict(signal);
}

double BpNetwork::accuracy(const Matrix& x, const Matrix& labels, Eigen::Index chunk) const {
  if (x.rows() == 0) throw std::invalid_argument("accuracy: empty dataset");
  double hits = 0.0;
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index len = std::min(chunk, x.rows() - start);
    hits += top1_accuracy(logits(x.middleRows(start, len)), labels.middleRows(start, len)) *
            static_cast<double>(len);
  }
  return hits / static_cast<double>(x.rows());
}

std::vector<Param*> BpNetwork::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  out.push_back(&head_.layer().weight());
  out.push_back(&head_.layer().bias());
  return out;
}

std::vector<ClassMap> predict_class_map(const LwbpNetwork& net, int grid_n) {
  if (grid_n < 2) throw std::invalid_argument("predict_class_map: grid_n must be >= 2");
  if (net.size() == 0 || net.module(0).config().in != 2) {
    throw DimensionError("predict_class_map: network must take 2-D input");
  }
  const auto n = static_cast<Eigen::Index>(grid_n);
  Matrix grid(n * n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      grid(i * n + j, 0) = static_cast<double>(j) / static_cast<double>(n - 1);
      grid(i * n + j, 1) = static_cast<double>(i) / static_cast<double>(n - 1);
    }
  }
  const auto logits = net.module_logits(grid);
  std::vector<ClassMap> maps;
  maps.reserve(logits.size());
  for (const auto& l : logits) {
    ClassMap map;
    map.n = grid_n;
    const auto cls = argmax_rows(l);
    map.cls.assign(cls.begin(), cls.end());
    maps.push_back(std::move(map));
  }
  return maps;
}

double grid_accuracy(const ClassMap& map, const std::function<int(double, double)>& labeler) {
  std::size_t hits = 0;
  const auto span = static_cast<double>(map.n - 1);
  for (int i = 0; i < map.n; ++i) {
    for (int j = 0; j < map.n; ++j) {
      hits += map.at(i, j) == labeler(static_cast<double>(j) / span, static_cast<double>(i) / span)
                  ? 1
                  : 0;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(map.cls.size());
}

double map_difference(const ClassMap& a, const ClassMap& b) {
  if (a.n != b.n) throw DimensionError("map_difference: grid sizes differ");
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.cls.size(); ++i) diff += a.cls[i] != b.cls[i] ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(a.cls.size());
}

}  // namespace cortexkit
