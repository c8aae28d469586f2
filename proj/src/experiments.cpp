#include "cortexkit/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <ostream>
#include <random>

#include "cortexkit/cerebellum.hpp"
#include "cortexkit/gradcheck.hpp"
#include "cortexkit/memory.hpp"
#include "cortexkit/pipeline.hpp"

namespace cortexkit {

namespace fs = std::filesystem;
using nlohmann::json;

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream) so neighbouring seeds do not
  // produce correlated mt19937_64 states.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

// ---------------------------------------------------------------------------

std::function<std::pair<Matrix, Matrix>()> point_stream(Rng& rng, int batch) {
  return [&rng, batch] {
    LabeledBatch b = sample_point_batch(rng, batch);
    return std::make_pair(std::move(b.x), std::move(b.labels));
  };
}

Lwbp2dResult run_lwbp_2d(const Lwbp2dOptions& opt, std::uint64_t seed, LwbpNetwork* trained) {
  require_dims(opt.net.input_dim == 2 && opt.net.label_dim == 2, "lwbp-2d: the point task is 2-in, 2-class");
  Rng init = derive_rng(seed, streams::kInit);
  Rng data = derive_rng(seed, streams::kData);
  LwbpNetwork net(opt.net, init);
  const std::size_t K = net.size();

  Lwbp2dResult res;
  for (std::size_t k = 0; k < K; ++k) res.curve.header.push_back("loss_" + std::to_string(k));
  for (std::size_t k = 0; k < K; ++k) res.curve.header.push_back("accuracy_" + std::to_string(k));

  for (std::size_t s = 1; s <= opt.steps; ++s) {
    const LabeledBatch b = sample_point_batch(data, opt.batch);
    const ModuleMetrics m = net.train_step(b.x, b.labels, opt.lr);
    if (opt.log_every && (s % opt.log_every == 0 || s == opt.steps)) {
      std::vector<double> row{static_cast<double>(s)};
      row.insert(row.end(), m.loss.begin(), m.loss.end());
      row.insert(row.end(), m.accuracy.begin(), m.accuracy.end());
      res.curve.add_numbers(row);
    }
  }

  res.maps = predict_class_map(net, opt.grid_n);
  for (std::size_t k = 0; k < K; ++k) {
    res.grid_accuracy.push_back(grid_accuracy(res.maps[k], point_label));
    res.map_change.push_back(k == 0 ? 0.0 : map_difference(res.maps[k], res.maps[k - 1]));
  }
  if (trained) *trained = std::move(net);
  return res;
}

// ---------------------------------------------------------------------------

ImageAlgo parse_image_algo(const std::string& name) {
  if (name == "lwbp") return ImageAlgo::Lwbp;
  if (name == "lwbp-noshortcut") return ImageAlgo::LwbpNoShortcut;
  if (name == "bp") return ImageAlgo::Bp;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected lwbp|lwbp-noshortcut|bp)");
}

std::string to_string(ImageAlgo algo) {
  switch (algo) {
    case ImageAlgo::Lwbp: return "lwbp";
    case ImageAlgo::LwbpNoShortcut: return "lwbp-noshortcut";
    case ImageAlgo::Bp: return "bp";
  }
  return "?";
}

std::vector<double> ImageCurve::final_column() const {
  std::vector<double> out;
  for (const auto& row : acc) out.push_back(row.back());
  return out;
}

Matrix image_inputs(const ImageSet& data) {
  Matrix x = data.features();
  normalize_rows(x);
  return x;
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  // Fisher-Yates with the portable index draw, so orders match across platforms.
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  return idx;
}

template <typename StepFn>
void for_each_batch(std::size_t n, int batch, Rng& rng, StepFn&& step) {
  const auto order = shuffled(n, rng);
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch));
    step(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(end)));
  }
}

}  // namespace

ImageCurve run_image_training(const ImageSet& data, const ImageOptions& opt, std::uint64_t seed) {
  require_dims(data.count() > 0, "image training: empty dataset");
  require_dims(opt.layers >= 1 && opt.width >= 1 && opt.batch >= 1 && opt.epochs >= 1,
               "image training: layers, width, batch and epochs must be positive");
  const Matrix x = image_inputs(data);
  const Matrix y = data.one_hot_labels(10);
  Rng init = derive_rng(seed, streams::kInit);
  Rng shuffle = derive_rng(seed, streams::kShuffle);

  NetworkConfig cfg{data.dim(), opt.width, opt.layers, 10, opt.act,
                    opt.algo != ImageAlgo::LwbpNoShortcut, LossKind::CrossEntropy};
  ImageCurve curve;
  if (opt.algo == ImageAlgo::Bp) {
    curve.csv.header.push_back("network");
    BpNetwork net(cfg, init);
    for (int e = 0; e < opt.epochs; ++e) {
      for_each_batch(data.count(), opt.batch, shuffle, [&](const std::vector<std::size_t>& idx) {
        net.train_step(gather_rows(x, idx), gather_rows(y, idx), opt.lr);
      });
      curve.acc.push_back({net.accuracy(x, y)});
    }
  } else {
    for (int k = 0; k < opt.layers; ++k) curve.csv.header.push_back("module_" + std::to_string(k));
    LwbpNetwork net(cfg, init);
    for (int e = 0; e < opt.epochs; ++e) {
      for_each_batch(data.count(), opt.batch, shuffle, [&](const std::vector<std::size_t>& idx) {
        net.train_step(gather_rows(x, idx), gather_rows(y, idx), opt.lr);
      });
      curve.acc.push_back(net.layerwise_accuracy(x, y));
    }
  }
  for (std::size_t e = 0; e < curve.acc.size(); ++e) {
    std::vector<double> row{static_cast<double>(e + 1)};
    row.insert(row.end(), curve.acc[e].begin(), curve.acc[e].end());
    curve.csv.add_numbers(row);
  }
  return curve;
}

int epochs_to_reach(const std::vector<double>& curve, double target) {
  for (std::size_t e = 0; e < curve.size(); ++e) {
    if (curve[e] >= target) return static_cast<int>(e + 1);
  }
  return -1;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("CORTEXKIT_DATA_DIR"); env && *env) return env;
  return "data";
}

ImageSet load_image_dataset(const std::string& name, const fs::path& dir, std::size_t subset) {
  ImageSet set;
  auto require = [&](const fs::path& p) {
    if (!fs::exists(p)) {
      throw DataError("missing dataset file " + p.string() +
                      " (set --data-dir or CORTEXKIT_DATA_DIR)");
    }
    return p;
  };
  if (name == "mnist") {
    const fs::path images = require(dir / "train-images-idx3-ubyte");
    set = load_mnist(images, require(dir / "train-labels-idx1-ubyte"));
  } else if (name == "digits") {
    const fs::path images = require(dir / "digits-images-idx3-ubyte");
    set = load_mnist(images, require(dir / "digits-labels-idx1-ubyte"));
  } else if (name == "cifar10") {
    std::vector<fs::path> files;
    for (int i = 1; i <= 5; ++i) {
      const fs::path p = dir / ("data_batch_" + std::to_string(i) + ".bin");
      if (fs::exists(p)) files.push_back(p);
      if (subset && files.size() * 10000 >= subset) break;
    }
    if (files.empty()) require(dir / "data_batch_1.bin");
    set = load_cifar10(files);
  } else {
    throw std::invalid_argument("unknown dataset '" + name + "' (expected mnist|cifar10|digits)");
  }
  if (subset && subset < set.count()) set = set.head(subset);
  return set;
}

// ---------------------------------------------------------------------------

BioCurve run_bio_training(const ImageSet& data, const BioOptions& opt, std::uint64_t seed) {
  require_dims(data.count() > 0, "bio training: empty dataset");
  if (opt.loss_neurons != 10) {
    throw std::invalid_argument("bio training: loss neurons must equal the 10 classes");
  }
  const Matrix x = image_inputs(data);
  const Matrix y = data.one_hot_labels(10);
  Rng init = derive_rng(seed, streams::kInit);
  Rng shuffle = derive_rng(seed, streams::kShuffle);
  BioNetwork net(data.dim(), opt.width, opt.loss_neurons, opt.modules, init);
  const BioTrainOptions topt{opt.lr, opt.mode, opt.rmsprop};

  BioCurve curve;
  for (int k = 0; k < opt.modules; ++k) curve.csv.header.push_back("module_" + std::to_string(k));
  for (int e = 0; e < opt.epochs; ++e) {
    for_each_batch(data.count(), opt.batch, shuffle, [&](const std::vector<std::size_t>& idx) {
      net.train_step(gather_rows(x, idx), gather_rows(y, idx), topt);
    });
    curve.acc.push_back(net.layerwise_accuracy(x, y));
    std::vector<double> row{static_cast<double>(e + 1)};
    row.insert(row.end(), curve.acc.back().begin(), curve.acc.back().end());
    curve.csv.add_numbers(row);
  }
  return curve;
}

// ---------------------------------------------------------------------------

EngramAE train_engram(const EngramOptions& opt, std::uint64_t seed, CsvTable* curve) {
  require_dims(opt.cfg.input_dim == 2, "train_engram: location sources are 2-D");
  Rng init = derive_rng(seed, streams::kInit);
  EngramAE ae(opt.cfg, init);
  LocationSource source(opt.source, opt.batch, derive_rng(seed, streams::kData));
  if (curve) *curve = CsvTable({"step", "reconstruction", "engram_sparse", "time_sparse", "total"});
  for (std::size_t s = 1; s <= opt.steps; ++s) {
    const LossComponents c = ae.train_step(source.next());
    if (curve && opt.log_every && (s % opt.log_every == 0 || s == opt.steps)) {
      curve->add_numbers({static_cast<double>(s), c.reconstruction, c.engram_sparse, c.time_sparse, c.total});
    }
  }
  return ae;
}

Matrix evaluation_locations(std::uint64_t seed, int count) {
  Rng rng = derive_rng(seed, streams::kEval);
  Matrix out(count, 2);
  for (int i = 0; i < count; ++i) {
    out(i, 0) = uniform01(rng);
    out(i, 1) = uniform01(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------

CsvTable cerebellum_scenario(int n, double total, int disable) {
  if (disable < 0 || disable > n) throw std::out_of_range("cerebellum: cannot disable " + std::to_string(disable));
  GranulePurkinje gp(n, total);
  CsvTable t({"step", "enabled", "effective_weight", "event"});
  t.add({"0", std::to_string(gp.enabled_count()), format_number(effective_weight(gp)), "initial"});
  const double target = total * static_cast<double>(n - disable) / static_cast<double>(n);
  const AdjustmentPlan plan = plan_adjustment(gp, target);
  int step = 1;
  for (int i : plan.disable) {
    gp.set_enabled(i, false);
    t.add({std::to_string(step++), std::to_string(gp.enabled_count()), format_number(effective_weight(gp)),
           "LTD granule " + std::to_string(i)});
  }
  return t;
}

CsvTable cerebellum_precision(const std::vector<int>& sizes, double total, int targets, std::uint64_t seed) {
  CsvTable t({"n", "resolution", "max_residual", "bound", "within_bound"});
  Rng rng = derive_rng(seed, streams::kTargets);
  for (int n : sizes) {
    GranulePurkinje gp(n, total);
    double worst = 0.0;
    for (int i = 0; i < targets; ++i) {
      const AdjustmentPlan plan = plan_adjustment(gp, uniform(rng, 0.0, total));
      worst = std::max(worst, plan.residual);
    }
    const double bound = total / (2.0 * n);
    t.add({std::to_string(n), format_number(gp.synapse_weight()), format_number(worst), format_number(bound),
           worst <= bound + 1e-15 ? "yes" : "no"});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

Activation act_of(const json& hp, const char* key) { return parse_activation(hp.at(key).get<std::string>()); }

fs::path data_dir_of(const json& hp) {
  const auto d = hp.at("data_dir").get<std::string>();
  return d.empty() ? default_data_dir() : fs::path(d);
}

void save(const fs::path& dir, const std::string& name, const CsvTable& t, ExperimentResult& r) {
  write_csv(dir / name, t);
  r.outputs.push_back(name);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Point2 parse_point(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw std::invalid_argument("expected x,y but got '" + s + "'");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument("expected x,y but got '" + s + "'");
  }
}

ExperimentResult cmd_gradcheck(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  GradcheckOptions opt;
  opt.seed = seed;
  opt.tolerance = hp.at("tolerance").get<double>();
  opt.fault = parse_grad_fault(hp.at("inject").get<std::string>());
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck(opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ExperimentResult r;
  CsvTable t({"suite", "max_rel_err", "checked", "passed"});
  for (const auto& s : results) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-28s max rel err %.3e over %zu entries  %s", s.suite.c_str(),
                  s.max_rel_err, s.checked, s.passed ? "ok" : "FAIL");
    log << buf << "\n";
    t.add({s.suite, format_number(s.max_rel_err), std::to_string(s.checked), s.passed ? "1" : "0"});
    r.passed = r.passed && s.passed;
  }
  log << results.size() << " suites, tolerance " << opt.tolerance << ", " << fmt(secs) << " s: "
      << (r.passed ? "PASS" : "FAIL") << "\n";
  save(dir, "gradcheck.csv", t, r);
  return r;
}

Lwbp2dOptions lwbp2d_options(const json& hp) {
  Lwbp2dOptions o;
  o.net.modules = hp.at("modules").get<int>();
  o.net.width = hp.at("width").get<int>();
  o.net.act = act_of(hp, "act");
  o.net.shortcut = hp.at("shortcut").get<bool>();
  o.steps = hp.at("steps").get<std::size_t>();
  o.batch = hp.at("batch").get<int>();
  o.lr = hp.at("lr").get<double>();
  o.grid_n = hp.at("grid").get<int>();
  o.log_every = hp.at("log_every").get<std::size_t>();
  return o;
}

ExperimentResult cmd_lwbp_2d(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const Lwbp2dResult res = run_lwbp_2d(lwbp2d_options(hp), seed);
  ExperimentResult r;
  CsvTable summary({"module", "grid_accuracy", "changed_vs_previous"});
  for (std::size_t k = 0; k < res.maps.size(); ++k) {
    const ClassMap& m = res.maps[k];
    Matrix img(m.n, m.n);
    // Flip vertically so y grows upward in the image.
    for (int i = 0; i < m.n; ++i) {
      for (int j = 0; j < m.n; ++j) img(m.n - 1 - i, j) = m.at(i, j);
    }
    const std::string name = "class_map_module_" + std::to_string(k) + ".pgm";
    write_pgm(dir / name, img, 0.0, 1.0);
    r.outputs.push_back(name);
    summary.add_numbers({static_cast<double>(k), res.grid_accuracy[k], res.map_change[k]});
    log << "module " << k << ": grid accuracy " << fmt(res.grid_accuracy[k]) << ", cells changed vs previous "
        << fmt(res.map_change[k]) << "\n";
  }
  save(dir, "metrics.csv", res.curve, r);
  save(dir, "grid_accuracy.csv", summary, r);
  return r;
}

ExperimentResult cmd_lwbp_img(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const ImageSet data = load_image_dataset(hp.at("dataset").get<std::string>(), data_dir_of(hp),
                                           hp.at("subset").get<std::size_t>());
  ImageOptions o;
  o.algo = parse_image_algo(hp.at("algo").get<std::string>());
  o.layers = hp.at("layers").get<int>();
  o.width = hp.at("width").get<int>();
  o.act = act_of(hp, "act");
  o.batch = hp.at("batch").get<int>();
  o.lr = hp.at("lr").get<double>();
  o.epochs = hp.at("epochs").get<int>();
  log << "training " << to_string(o.algo) << " on " << data.count() << " images of dim " << data.dim() << "\n";
  const ImageCurve c = run_image_training(data, o, seed);
  for (std::size_t e = 0; e < c.acc.size(); ++e) {
    log << "epoch " << e + 1 << ": final accuracy " << fmt(c.acc[e].back()) << "\n";
  }
  ExperimentResult r;
  save(dir, "accuracy.csv", c.csv, r);
  return r;
}

ExperimentResult cmd_bio(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  BioOptions o;
  o.width = hp.at("width").get<int>();
  o.loss_neurons = hp.at("loss_neurons").get<int>();
  if (o.loss_neurons <= 0 || o.width % o.loss_neurons != 0) {
    throw std::invalid_argument("width " + std::to_string(o.width) + " is not divisible by " +
                                std::to_string(o.loss_neurons) + " loss neurons");
  }
  o.modules = hp.at("modules").get<int>();
  o.batch = hp.at("batch").get<int>();
  o.lr = hp.at("lr").get<double>();
  o.epochs = hp.at("epochs").get<int>();
  o.mode = parse_gradient_mode(hp.at("gradient_mode").get<std::string>());
  o.rmsprop = hp.at("rmsprop").get<bool>();
  const ImageSet data = load_image_dataset(hp.at("dataset").get<std::string>(), data_dir_of(hp),
                                           hp.at("subset").get<std::size_t>());
  log << "bio network: rho = " << o.width / o.loss_neurons << " pyramidal neurons per loss neuron, "
      << to_string(o.mode) << " derivative\n";
  const BioCurve c = run_bio_training(data, o, seed);
  ExperimentResult r;
  save(dir, "accuracy.csv", c.csv, r);
  CsvTable fin({"module", "final_accuracy"});
  for (std::size_t k = 0; k < c.acc.back().size(); ++k) {
    fin.add_numbers({static_cast<double>(k), c.acc.back()[k]});
    log << "module " << k << ": " << fmt(c.acc.back()[k]) << "\n";
  }
  save(dir, "final_accuracy.csv", fin, r);
  return r;
}

EngramConfig engram_config(const json& hp) {
  EngramConfig cfg;
  cfg.neurons = hp.at("neurons").get<int>();
  cfg.eta = hp.at("eta").get<double>();
  cfg.lr = hp.at("lr").get<double>();
  cfg.weights.reconstruction = hp.at("k1").get<double>();
  cfg.weights.engram_sparse = hp.at("k2").get<double>();
  cfg.weights.time_sparse = hp.at("k3").get<double>();
  if (cfg.neurons <= 0 || !(cfg.eta > 0.0 && cfg.eta < 1.0)) {
    throw std::invalid_argument("engram: need neurons > 0 and 0 < eta < 1");
  }
  return cfg;
}

void engram_location_outputs(const EngramAE& ae, std::uint64_t seed, const fs::path& dir, std::ostream& log,
                             ExperimentResult& r) {
  const SparsityStats st = sparsity_statistics(ae, evaluation_locations(seed));
  CsvTable sp({"frac_inhibited", "frac_mid", "frac_extreme"});
  sp.add_numbers({st.frac_inhibited, st.frac_mid, st.frac_extreme});
  save(dir, "sparsity.csv", sp, r);
  log << "sparsity over 10000 locations: inhibited " << fmt(st.frac_inhibited) << ", mid " << fmt(st.frac_mid)
      << ", extreme " << fmt(st.frac_extreme) << "\n";

  const Matrix loc = characteristic_locations(ae);
  CsvTable scatter({"neuron", "x", "y"});
  for (Eigen::Index i = 0; i < loc.rows(); ++i) scatter.add_numbers({static_cast<double>(i), loc(i, 0), loc(i, 1)});
  save(dir, "characteristic_locations.csv", scatter, r);

  const Matrix hist = density_heatmap(loc, 25);
  CsvTable dens({"x", "y", "mass"});
  for (int i = 0; i < 25; ++i) {
    for (int j = 0; j < 25; ++j) dens.add_numbers({(j + 0.5) / 25.0, (i + 0.5) / 25.0, hist(i, j)});
  }
  save(dir, "density.csv", dens, r);
  write_pgm(dir / "density.pgm", hist.colwise().reverse(), 0.0, std::max(hist.maxCoeff(), 1e-12));
  r.outputs.push_back("density.pgm");

  // Place fields of the four neurons with the highest peak response.
  const int n = 101;
  const Matrix response = grid_response(ae, n);
  std::vector<int> order(static_cast<std::size_t>(ae.neurons()));
  std::iota(order.begin(), order.end(), 0);
  const RowVector peaks = response.colwise().maxCoeff();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return peaks(a) > peaks(b); });
  CsvTable fields({"neuron", "x", "y", "h"});
  for (std::size_t s = 0; s < std::min<std::size_t>(4, order.size()); ++s) {
    const PlaceField pf = place_field(response, n, order[s]);
    Matrix img(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double h = pf.values[static_cast<std::size_t>(i * n + j)];
        img(n - 1 - i, j) = h;
        fields.add_numbers({static_cast<double>(pf.neuron), j / 100.0, i / 100.0, h});
      }
    }
    const std::string name = "place_field_" + std::to_string(pf.neuron) + ".pgm";
    write_pgm(dir / name, img, 0.0, 1.0);
    r.outputs.push_back(name);
  }
  save(dir, "place_fields.csv", fields, r);
  const PlaceFieldConsistency pc = place_field_consistency(ae);
  log << "place-field consistency: " << pc.consistent << " of " << pc.bright << " bright neurons\n";
}

ExperimentResult cmd_engram(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const std::string source = hp.at("source").get<std::string>();
  EngramConfig cfg = engram_config(hp);
  const auto steps = hp.at("steps").get<std::size_t>();
  const int batch = hp.at("batch").get<int>();
  const auto log_every = hp.at("log_every").get<std::size_t>();
  ExperimentResult r;

  if (source == "mnist") {
    const ImageSet data = load_image_dataset("mnist", data_dir_of(hp), hp.at("subset").get<std::size_t>());
    const Matrix x = data.features();
    Rng init = derive_rng(seed, streams::kInit);
    Rng shuffle = derive_rng(seed, streams::kShuffle);
    MnistAEConfig mcfg;
    mcfg.image_dim = data.dim();
    MnistJointModel model(mcfg, cfg, init);
    CsvTable curve({"step", "image", "reconstruction", "engram_sparse", "time_sparse", "total"});
    std::size_t s = 0;
    while (s < steps) {
      for_each_batch(data.count(), batch, shuffle, [&](const std::vector<std::size_t>& idx) {
        if (s >= steps) return;
        const JointLoss l = model.train_step(gather_rows(x, idx), cfg.lr);
        ++s;
        if (log_every && (s % log_every == 0 || s == steps)) {
          curve.add_numbers({static_cast<double>(s), l.image, l.engram.reconstruction, l.engram.engram_sparse,
                             l.engram.time_sparse, l.total});
        }
      });
    }
    save(dir, "loss.csv", curve, r);
    const auto eval_n = std::min<std::size_t>(data.count(), 10000);
    const auto fwd = model.forward(x.topRows(static_cast<Eigen::Index>(eval_n)));
    const SparsityStats st = sparsity_statistics(fwd.h);
    CsvTable sp({"frac_inhibited", "frac_mid", "frac_extreme"});
    sp.add_numbers({st.frac_inhibited, st.frac_mid, st.frac_extreme});
    save(dir, "sparsity.csv", sp, r);
    save_snapshot(dir / "engram.bin", model.engram());
    r.outputs.push_back("engram.bin");
    log << "sparsity over " << eval_n << " images: inhibited " << fmt(st.frac_inhibited) << ", mid "
        << fmt(st.frac_mid) << ", extreme " << fmt(st.frac_extreme) << "\n";
    return r;
  }

  EngramOptions o;
  o.cfg = cfg;
  o.source = parse_location_kind(source);
  o.steps = steps;
  o.batch = batch;
  o.log_every = log_every;
  CsvTable curve({"step"});
  const EngramAE ae = train_engram(o, seed, &curve);
  save(dir, "loss.csv", curve, r);
  save_snapshot(dir / "engram.bin", ae);
  r.outputs.push_back("engram.bin");
  engram_location_outputs(ae, seed, dir, log, r);
  return r;
}

ExperimentResult cmd_memory(const json& hp, std::uint64_t, const fs::path& dir, std::ostream& log) {
  const std::string model = hp.at("model").get<std::string>();
  if (model.empty()) throw std::invalid_argument("memory-map: --model is required");
  const EngramAE ae = load_snapshot(model);
  const Point2 site = parse_point(hp.at("site").get<std::string>());
  const double thr = hp.at("threshold").get<double>();
  const int n = hp.at("grid").get<int>();
  ExperimentResult r;

  const LtpSynapses syn = form_ltp(ae, site, thr);
  log << "LTP at (" << site.x << "," << site.y << "): " << syn.potentiated() << " engram cells potentiated\n";
  if (!syn.warning.empty()) {
    log << "warning: " << syn.warning << "\n";
    r.passed = false;
    r.note = syn.warning;
    return r;
  }
  const Matrix map = memory_heatmap(ae, syn, n);
  save(dir, "memory_heatmap.csv", grid_csv(map), r);
  write_pgm(dir / "memory_heatmap.pgm", map.colwise().reverse(), 0.0, 1.0);
  r.outputs.push_back("memory_heatmap.pgm");

  Eigen::Index bi = 0, bj = 0;
  map.maxCoeff(&bi, &bj);
  const Point2 peak{static_cast<double>(bj) / (n - 1), static_cast<double>(bi) / (n - 1)};
  log << "recall peak " << fmt(map(bi, bj)) << " at (" << fmt(peak.x) << "," << fmt(peak.y)
      << "), distance to site " << fmt(distance(peak, site)) << "\n";

  const Point2 p1 = parse_point(hp.at("probe1").get<std::string>());
  const Point2 p2 = parse_point(hp.at("probe2").get<std::string>());
  const SharedEngram sh = shared_engram(ae, p1, p2, thr);
  log << "engram at probe1: " << sh.only1.size() + sh.both.size() << " cells, probe2: "
      << sh.only2.size() + sh.both.size() << " cells, shared: " << sh.both.size() << "\n";
  CsvTable rep({"probe", "x", "y", "engram_size", "shared"});
  rep.add({"1", format_number(p1.x), format_number(p1.y), std::to_string(sh.only1.size() + sh.both.size()),
           std::to_string(sh.both.size())});
  rep.add({"2", format_number(p2.x), format_number(p2.y), std::to_string(sh.only2.size() + sh.both.size()),
           std::to_string(sh.both.size())});
  save(dir, "shared_engram.csv", rep, r);
  return r;
}

ExperimentResult cmd_cerebellum(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const int n = hp.at("granule").get<int>();
  const double total = hp.at("total").get<double>();
  const int disable = hp.at("disable").get<int>();
  ExperimentResult r;
  const CsvTable sc = cerebellum_scenario(n, total, disable);
  log << "step  enabled  effective_weight  event\n";
  for (const auto& row : sc.rows) log << row[0] << "     " << row[1] << "        " << row[2] << "   " << row[3] << "\n";
  save(dir, "cerebellum_scenario.csv", sc, r);
  const CsvTable pr = cerebellum_precision(hp.at("sizes").get<std::vector<int>>(), total,
                                           hp.at("targets").get<int>(), seed);
  log << "n      resolution  max_residual  bound\n";
  for (const auto& row : pr.rows) log << row[0] << "  " << row[1] << "  " << row[2] << "  " << row[3] << "\n";
  save(dir, "cerebellum_precision.csv", pr, r);
  return r;
}

bool params_bit_equal(LwbpNetwork& a, LwbpNetwork& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto pa = a.module(k).params();
    const auto pb = b.module(k).params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (!bit_equal(pa[i]->value, pb[i]->value) || !bit_equal(pa[i]->rms, pb[i]->rms)) return false;
    }
  }
  return true;
}

ExperimentResult cmd_pipeline(const json& hp, std::uint64_t seed, const fs::path& dir, std::ostream& log) {
  const PipelineMode mode = parse_pipeline_mode(hp.at("mode").get<std::string>());
  const auto capacity = hp.at("capacity").get<std::size_t>();
  const auto steps = hp.at("steps").get<std::size_t>();
  const int batch = hp.at("batch").get<int>();
  const double lr = hp.at("lr").get<double>();
  NetworkConfig cfg;
  cfg.modules = hp.at("modules").get<int>();
  cfg.width = hp.at("width").get<int>();

  Rng init_a = derive_rng(seed, streams::kInit);
  LwbpNetwork piped(cfg, init_a);
  Rng data_a = derive_rng(seed, streams::kData);
  const PipelineRun run = mode == PipelineMode::Sync
                              ? run_sync(piped, point_stream(data_a, batch), steps, lr)
                              : run_async(piped, point_stream(data_a, batch), steps, lr, capacity);

  ExperimentResult r;
  CsvTable metrics({"batch"});
  for (std::size_t k = 0; k < piped.size(); ++k) metrics.header.push_back("loss_" + std::to_string(k));
  for (std::size_t t = 0; t < run.metrics.size(); ++t) {
    std::vector<double> row{static_cast<double>(t)};
    row.insert(row.end(), run.metrics[t].loss.begin(), run.metrics[t].loss.end());
    metrics.add_numbers(row);
  }
  save(dir, "pipeline_metrics.csv", metrics, r);
  write_text(dir / "throughput.csv", throughput_csv(throughput_report(run)));
  r.timing_outputs.push_back("throughput.csv");

  std::uint64_t max_stale = 0;
  for (const auto& s : run.stages) max_stale = std::max(max_stale, s.max_staleness);
  log << to_string(mode) << " pipeline, " << piped.size() << " stages, " << steps << " batches, "
      << fmt(run.wall_s) << " s\n";
  if (mode == PipelineMode::Sync) {
    Rng init_b = derive_rng(seed, streams::kInit);
    LwbpNetwork sequential(cfg, init_b);
    Rng data_b = derive_rng(seed, streams::kData);
    for (std::size_t t = 0; t < steps; ++t) {
      const LabeledBatch b = sample_point_batch(data_b, batch);
      sequential.train_step(b.x, b.labels, lr);
    }
    const bool same = params_bit_equal(piped, sequential);
    log << "sync vs sequential parameters: " << (same ? "IDENTICAL" : "DIFFERENT") << "\n";
    r.passed = same;
  } else {
    log << "max staleness " << max_stale << " (queue capacity " << capacity << ")\n";
    r.deterministic = false;
    r.note = "async pipeline: stage interleaving depends on thread scheduling, outputs are not reproducible";
    r.passed = max_stale <= capacity;
  }
  return r;
}

json common_image_defaults() {
  return {{"dataset", "mnist"}, {"data_dir", ""}, {"subset", 5000}};
}

}  // namespace

const std::vector<ExperimentDef>& experiments() {
  static const std::vector<ExperimentDef> defs = [] {
    std::vector<ExperimentDef> d;
    d.push_back({"gradcheck", "finite-difference check of every analytic gradient and bio delta",
                 {{"tolerance", 1e-6}, {"inject", "none"}}, cmd_gradcheck});
    d.push_back({"train-lwbp-2d", "LWBP network on the 2-D point task, per-module class maps",
                 {{"modules", 5}, {"width", 16}, {"act", "leakyrelu"}, {"shortcut", true}, {"steps", 50000},
                  {"batch", 256}, {"lr", 1e-4}, {"grid", 150}, {"log_every", 1000}},
                 cmd_lwbp_2d});
    json img = common_image_defaults();
    img.update({{"algo", "lwbp"}, {"layers", 12}, {"width", 300}, {"act", "tanh"}, {"batch", 256},
                {"lr", 1e-4}, {"epochs", 10}});
    d.push_back({"train-lwbp-img", "LWBP / LWBP without shortcut / BP on image data", img, cmd_lwbp_img});
    json bio = common_image_defaults();
    bio.update({{"width", 900}, {"loss_neurons", 10}, {"modules", 4}, {"batch", 256}, {"lr", 0.01},
                {"epochs", 5}, {"gradient_mode", "consistent"}, {"rmsprop", false}});
    d.push_back({"train-bio-lwbp", "biological LWBP network with closed-form neuron updates", bio, cmd_bio});
    d.push_back({"train-engram", "engram autoencoder on locations or MNIST codes",
                 {{"source", "walk"}, {"neurons", 1000}, {"eta", 0.05}, {"steps", 1300000}, {"batch", 8},
                  {"lr", 1e-4}, {"k1", 1000.0}, {"k2", 0.01}, {"k3", 10.0}, {"log_every", 1000},
                  {"data_dir", ""}, {"subset", 10000}},
                 cmd_engram});
    d.push_back({"memory-map", "LTP at a site and the recall heatmap of a trained engram model",
                 {{"model", ""}, {"site", "0.8,0.2"}, {"threshold", 0.95}, {"grid", 101},
                  {"probe1", "0.8,0.2"}, {"probe2", "0.7,0.3"}},
                 cmd_memory});
    d.push_back({"cerebellum-demo", "granule-to-Purkinje weight adjustment by LTD/LTP",
                 {{"granule", 10}, {"total", 1.0}, {"disable", 3}, {"sizes", {10, 100, 1000, 2991}},
                  {"targets", 1000}},
                 cmd_cerebellum});
    d.push_back({"pipeline-bench", "stage-parallel LWBP training on the 2-D task",
                 {{"mode", "sync"}, {"capacity", 1}, {"steps", 100}, {"batch", 256}, {"lr", 1e-4},
                  {"modules", 5}, {"width", 16}},
                 cmd_pipeline});
    return d;
  }();
  return defs;
}

const ExperimentDef& find_experiment(const std::string& name) {
  for (const auto& e : experiments()) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

json merge_hyperparameters(const json& defaults, const json& overrides) {
  json out = defaults;
  if (overrides.is_null()) return out;
  if (!overrides.is_object()) throw std::invalid_argument("hyperparameters must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (!defaults.contains(key)) throw std::invalid_argument("unknown setting '" + key + "'");
    const json& d = defaults.at(key);
    const bool numeric = d.is_number() && value.is_number();
    if (d.type() != value.type() && !numeric) {
      throw std::invalid_argument("setting '" + key + "' expects " + std::string(d.type_name()) + ", got " +
                                  std::string(value.type_name()));
    }
    if (d.is_number_integer() && !value.is_number_integer()) {
      throw std::invalid_argument("setting '" + key + "' expects an integer");
    }
    if (d.is_number_unsigned() && value.is_number_integer() && value.get<std::int64_t>() < 0) {
      throw std::invalid_argument("setting '" + key + "' must be non-negative");
    }
    out[key] = d.is_number_float() ? json(value.get<double>()) : value;
  }
  return out;
}

RunManifest run_experiment(const std::string& name, const json& overrides, std::uint64_t seed,
                           const fs::path& out_dir, std::ostream& log, bool* passed) {
  const ExperimentDef& def = find_experiment(name);
  const json hp = merge_hyperparameters(def.defaults, overrides);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult res = def.run(hp, seed, out_dir, log);
  RunManifest m;
  m.experiment = name;
  m.seed = seed;
  m.hyperparameters = hp;
  m.git_describe = git_describe();
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.outputs = res.outputs;
  m.timing_outputs = res.timing_outputs;
  m.deterministic = res.deterministic;
  m.note = res.note;
  write_manifest(out_dir / kManifestName, m);
  if (passed) *passed = res.passed;
  return m;
}

ReplayReport replay_manifest(const fs::path& manifest_path, const fs::path& out_dir, std::ostream& log) {
  ReplayReport rep;
  rep.original = read_manifest(manifest_path);
  const fs::path src_dir = manifest_path.parent_path();
  if (fs::exists(out_dir) && fs::equivalent(out_dir, src_dir.empty() ? fs::path(".") : src_dir)) {
    throw std::invalid_argument("replay: output directory must differ from the manifest's directory");
  }
  rep.replay = run_experiment(rep.original.experiment, rep.original.hyperparameters, rep.original.seed, out_dir, log);
  rep.skipped = rep.original.timing_outputs;
  for (const auto& f : rep.original.outputs) {
    if (!rep.original.deterministic) {
      rep.skipped.push_back(f);
      continue;
    }
    const fs::path a = src_dir / f;
    const fs::path b = out_dir / f;
    if (fs::exists(a) && fs::exists(b) && read_text(a) == read_text(b)) {
      rep.identical.push_back(f);
    } else {
      rep.differing.push_back(f);
    }
  }
  return rep;
}

}  // namespace cortexkit
