#include "cortexkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cortexkit/biolwbp.hpp"
#include "cortexkit/engram.hpp"
#include "cortexkit/lwbp.hpp"

namespace cortexkit {

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, double lo, double hi, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

Matrix random_one_hot(Eigen::Index batch, int classes, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(batch));
  for (auto& l : labels) l = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(classes)));
  return one_hot(labels, classes);
}

Matrix random_soft_labels(Eigen::Index batch, int classes, Rng& rng) {
  Matrix m = random_matrix(batch, classes, 0.05, 1.0, rng);
  for (Eigen::Index i = 0; i < batch; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

void randomize_bias(Dense& d, Rng& rng) {
  d.bias().value = random_matrix(1, d.out_dim(), -0.3, 0.3, rng);
}

struct Suite {
  std::string name;
  double max_err = 0.0;
  std::size_t checked = 0;

  void add(Matrix& value, const Matrix& analytic, const std::function<double()>& f,
           const GradcheckOptions& opt) {
    std::size_t n = 0;
    max_err = std::max(max_err, compare_gradient(value, analytic, f, opt, &n));
    checked += n;
  }

  GradcheckResult result(const GradcheckOptions& opt) const {
    return {name, max_err, checked, checked > 0 && max_err < opt.tolerance};
  }
};

GradcheckResult dense_suite(const std::string& name, LayerSpec spec, LossKind loss, bool soft,
                            const GradcheckOptions& opt, Rng& rng) {
  Dense d(spec, rng);
  randomize_bias(d, rng);
  Matrix x = random_matrix(6, spec.in, -1.0, 1.0, rng);
  const Matrix label = loss == LossKind::MeanSquaredError ? random_matrix(6, spec.out, -1.0, 1.0, rng)
                       : soft                             ? random_soft_labels(6, spec.out, rng)
                                                          : random_one_hot(6, spec.out, rng);
  d.zero_grad();
  const Matrix y = d.forward(x);
  const Matrix gx = d.backward(loss_gradient(y, label, loss));
  const Matrix gw = d.weight().grad;
  const Matrix gb = d.bias().grad;
  auto f = [&] { return loss_value(d.infer(x), label, loss); };
  Suite s{name};
  s.add(d.weight().value, gw, f, opt);
  s.add(d.bias().value, gb, f, opt);
  s.add(x, gx, f, opt);
  return s.result(opt);
}

GradcheckResult lwbp_module_suite(const GradcheckOptions& opt, Rng& rng) {
  LwbpModule m(ModuleConfig{5, 5, Activation::LeakyRelu, true, 3, LossKind::CrossEntropy}, rng);
  randomize_bias(m.main(), rng);
  randomize_bias(m.head().layer(), rng);
  const Matrix x = random_matrix(8, 5, -1.0, 1.0, rng);
  const Matrix label = random_one_hot(8, 3, rng);
  m.main().zero_grad();
  m.head().layer().zero_grad();
  const Matrix y = m.main().forward(x);
  Matrix gy;
  m.head().forward_backward(y, label, &gy);
  m.main().backward(gy, false);
  std::vector<Matrix> analytic;
  for (Param* p : m.params()) analytic.push_back(p->grad);
  auto f = [&] { return loss_value(m.head_logits(x), label, LossKind::CrossEntropy); };
  Suite s{"lwbp-module-local"};
  const auto params = m.params();
  for (std::size_t i = 0; i < params.size(); ++i) s.add(params[i]->value, analytic[i], f, opt);
  return s.result(opt);
}

GradcheckResult bp_suite(const GradcheckOptions& opt, Rng& rng) {
  NetworkConfig cfg{3, 6, 3, 3, Activation::LeakyRelu, true, LossKind::CrossEntropy};
  BpNetwork net(cfg, rng);
  for (auto& l : net.layers()) randomize_bias(l, rng);
  randomize_bias(net.head().layer(), rng);
  const Matrix x = random_matrix(8, 3, 0.0, 1.0, rng);
  const Matrix label = random_one_hot(8, 3, rng);
  net.compute_gradients(x, label);
  const auto params = net.params();
  std::vector<Matrix> analytic;
  for (Param* p : params) analytic.push_back(p->grad);
  auto f = [&] { return net.loss(x, label); };
  Suite s{"bp-end-to-end"};
  for (std::size_t i = 0; i < params.size(); ++i) s.add(params[i]->value, analytic[i], f, opt);
  return s.result(opt);
}

// One suite per closed-form delta, each covering a first (linear) module and
// a shortcut module. Analytic gradient = -delta / lr.
std::vector<GradcheckResult> bio_suites(const GradcheckOptions& opt, Rng& rng) {
  const double lr = 0.5;
  Suite sw{"bio-delta-weight"}, sb{"bio-delta-bias"}, sa{"bio-delta-alpha"}, sp{"bio-delta-pred-bias"};
  for (bool shortcut : {false, true}) {
    BioModuleConfig cfg{shortcut ? 12 : 7, 12, 3, shortcut, 1.0};
    BioModule m(cfg, rng);
    m.bias().value = random_matrix(1, 12, -0.3, 0.3, rng);
    m.alpha().value = random_matrix(1, 3, 0.5, 2.0, rng);
    m.pred_bias().value = random_matrix(1, 3, -0.5, 0.5, rng);
    const Matrix x = random_matrix(5, cfg.in, -1.0, 1.0, rng);
    const Matrix label = random_one_hot(5, 3, rng);
    BioDeltas d = m.deltas(m.forward(x), label, lr, BioGradientMode::Consistent);
    if (opt.fault == GradFault::BioAlphaSignFlip) d.alpha = -d.alpha;
    auto f = [&] { return bio_loss(m.forward(x).pred, label); };
    sw.add(m.weight().value, -d.weight / lr, f, opt);
    sb.add(m.bias().value, Matrix(-d.bias / lr), f, opt);
    sa.add(m.alpha().value, Matrix(-d.alpha / lr), f, opt);
    sp.add(m.pred_bias().value, Matrix(-d.pred_bias / lr), f, opt);
  }
  return {sw.result(opt), sb.result(opt), sa.result(opt), sp.result(opt)};
}

void scramble_trackers(EngramAE& ae, Rng& rng) {
  ae.long_tracker().average() = random_matrix(1, ae.neurons(), 0.01, 0.4, rng);
  ae.short_tracker().average() = random_matrix(1, ae.neurons(), 0.01, 0.4, rng);
}

GradcheckResult engram_suite(const GradcheckOptions& opt, Rng& rng) {
  EngramConfig cfg;
  cfg.encoder_widths = {6, 5};
  cfg.neurons = 12;
  cfg.eta = 0.25;
  EngramAE ae(cfg, rng);
  for (auto& l : ae.encoder()) randomize_bias(l, rng);
  randomize_bias(ae.engram_layer(), rng);
  scramble_trackers(ae, rng);
  Matrix x = random_matrix(7, 2, 0.0, 1.0, rng);
  ae.forward_train(x, false);
  Matrix gx;
  ae.backward_train(nullptr, &gx);
  const auto params = ae.params();
  std::vector<Matrix> analytic;
  for (Param* p : params) analytic.push_back(p->grad);
  auto f = [&] { return ae.evaluate(x).total; };
  Suite s{"engram-total-loss"};
  for (std::size_t i = 0; i < params.size(); ++i) s.add(params[i]->value, analytic[i], f, opt);
  s.add(x, gx, f, opt);
  return s.result(opt);
}

GradcheckResult joint_suite(const GradcheckOptions& opt, Rng& rng) {
  MnistAEConfig mcfg;
  mcfg.image_dim = 6;
  mcfg.encoder_widths = {5, 4};
  mcfg.decoder_widths = {5};
  EngramConfig ecfg;
  ecfg.encoder_widths = {5};
  ecfg.neurons = 8;
  ecfg.eta = 0.25;
  MnistJointModel model(mcfg, ecfg, rng);
  scramble_trackers(model.engram(), rng);
  const auto params = model.params();
  for (Param* p : params) {
    if (p->value.rows() == 1) p->value = random_matrix(1, p->value.cols(), -0.3, 0.3, rng);
  }
  const Matrix images = random_matrix(5, 6, 0.0, 1.0, rng);
  model.compute_gradients(images, false);
  std::vector<Matrix> analytic;
  for (Param* p : params) analytic.push_back(p->grad);
  auto f = [&] { return model.evaluate(images).total; };
  Suite s{"engram-joint-image"};
  for (std::size_t i = 0; i < params.size(); ++i) s.add(params[i]->value, analytic[i], f, opt);
  return s.result(opt);
}

}  // namespace

GradFault parse_grad_fault(const std::string& name) {
  if (name.empty() || name == "none") return GradFault::None;
  if (name == "alpha-sign") return GradFault::BioAlphaSignFlip;
  throw std::invalid_argument("unknown fault '" + name + "' (expected none|alpha-sign)");
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double central_difference(const std::function<double()>& f, double& x, double h) {
  const double x0 = x;
  x = x0 + 2 * h;
  const double f2p = f();
  x = x0 + h;
  const double f1p = f();
  x = x0 - h;
  const double f1m = f();
  x = x0 - 2 * h;
  const double f2m = f();
  x = x0;
  return (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
}

double compare_gradient(Matrix& value, const Matrix& analytic, const std::function<double()>& loss,
                        const GradcheckOptions& opt, std::size_t* checked) {
  require_dims(value.rows() == analytic.rows() && value.cols() == analytic.cols(),
               "compare_gradient: value " + shape_str(value) + " vs gradient " + shape_str(analytic));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < value.size(); ++i) {
    // A step that straddles a LeakyReLU or |.| kink spoils the estimate; the
    // smaller steps of the ladder stay on one side of it.
    double best = std::numeric_limits<double>::infinity();
    for (double h = opt.step; h >= opt.step * 1e-2; h /= 10) {
      const double numeric = central_difference(loss, value.data()[i], h);
      best = std::min(best, relative_error(analytic.data()[i], numeric, opt.denom_floor));
    }
    worst = std::max(worst, best);
  }
  if (checked) *checked = static_cast<std::size_t>(value.size());
  return worst;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opt) {
  Rng rng(opt.seed);
  std::vector<GradcheckResult> out;
  out.push_back(dense_suite("dense-tanh-mse", {5, 4, Activation::Tanh, false, true},
                            LossKind::MeanSquaredError, false, opt, rng));
  out.push_back(dense_suite("dense-sigmoid-shortcut-ce", {4, 4, Activation::Sigmoid, true, true},
                            LossKind::CrossEntropy, true, opt, rng));
  out.push_back(dense_suite("dense-leakyrelu-ce", {5, 4, Activation::LeakyRelu, false, true},
                            LossKind::CrossEntropy, false, opt, rng));
  out.push_back(dense_suite("dense-identity-mse", {3, 5, Activation::Identity, false, true},
                            LossKind::MeanSquaredError, false, opt, rng));
  out.push_back(lwbp_module_suite(opt, rng));
  out.push_back(bp_suite(opt, rng));
  for (auto& r : bio_suites(opt, rng)) out.push_back(std::move(r));
  out.push_back(engram_suite(opt, rng));
  out.push_back(joint_suite(opt, rng));
  return out;
}

}  // namespace cortexkit
