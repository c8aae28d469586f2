#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cortexkit/cerebellum.hpp"
#include "cortexkit/experiments.hpp"
#include "cortexkit/gradcheck.hpp"
#include "cortexkit/memory.hpp"
#include "cortexkit/pipeline.hpp"

namespace py = pybind11;
using namespace cortexkit;

namespace {

Point2 to_point(const std::pair<double, double>& p) { return {p.first, p.second}; }

py::dict lwbp_2d(std::size_t steps, int modules, int width, const std::string& act, bool shortcut, double lr,
                 int grid, std::uint64_t seed) {
  Lwbp2dOptions opt;
  opt.steps = steps;
  opt.net.modules = modules;
  opt.net.width = width;
  opt.net.act = parse_activation(act);
  opt.net.shortcut = shortcut;
  opt.lr = lr;
  opt.grid_n = grid;
  Lwbp2dResult res;
  {
    py::gil_scoped_release release;
    res = run_lwbp_2d(opt, seed);
  }
  py::list maps;
  for (const auto& m : res.maps) maps.append(py::array_t<std::uint8_t>({m.n, m.n}, m.cls.data()));
  py::dict out;
  out["grid_accuracy"] = res.grid_accuracy;
  out["map_change"] = res.map_change;
  out["class_maps"] = maps;
  return out;
}

}  // namespace

PYBIND11_MODULE(_cortexkit, m) {
  m.doc() = "Local-loss training, engram place cells and quantized synapses";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<IoError>(m, "IoError", PyExc_IOError);

  m.def("point_label", &point_label, py::arg("x"), py::arg("y"));

  m.def(
      "gradcheck",
      [] {
        py::list out;
        for (const auto& r : run_gradcheck()) {
          py::dict d;
          d["suite"] = r.suite;
          d["max_rel_err"] = r.max_rel_err;
          d["checked"] = r.checked;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      "Analytic vs numeric gradients for every trainable component.");

  m.def("train_lwbp_2d", &lwbp_2d, py::arg("steps") = 50000, py::arg("modules") = 5, py::arg("width") = 16,
        py::arg("act") = "leakyrelu", py::arg("shortcut") = true, py::arg("lr") = 1e-4, py::arg("grid") = 150,
        py::arg("seed") = 1,
        "Trains on the rotated 2-D task; returns per-module grid accuracy, map change and class maps.");

  py::class_<LwbpNetwork>(m, "LwbpNetwork")
      .def(py::init([](int input_dim, int width, int modules, int label_dim, const std::string& act, bool shortcut,
                       std::uint64_t seed) {
             NetworkConfig cfg;
             cfg.input_dim = input_dim;
             cfg.width = width;
             cfg.modules = modules;
             cfg.label_dim = label_dim;
             cfg.act = parse_activation(act);
             cfg.shortcut = shortcut;
             Rng rng = derive_rng(seed, streams::kInit);
             return LwbpNetwork(cfg, rng);
           }),
           py::arg("input_dim") = 2, py::arg("width") = 16, py::arg("modules") = 5, py::arg("label_dim") = 2,
           py::arg("act") = "leakyrelu", py::arg("shortcut") = true, py::arg("seed") = 1)
      .def("__len__", &LwbpNetwork::size)
      .def(
          "train_step",
          [](LwbpNetwork& net, const Matrix& x, const Matrix& y, double lr) {
            const ModuleMetrics mm = net.train_step(x, y, lr);
            return py::make_tuple(mm.loss, mm.accuracy);
          },
          py::arg("x"), py::arg("y"), py::arg("lr") = 1e-4, "Returns (per-module losses, per-module accuracies).")
      .def("module_outputs", &LwbpNetwork::module_outputs)
      .def("layerwise_accuracy",
           [](const LwbpNetwork& net, const Matrix& x, const Matrix& y) { return net.layerwise_accuracy(x, y); });

  py::class_<EngramAE>(m, "EngramAE")
      .def_property_readonly("neurons", &EngramAE::neurons)
      .def_property_readonly("eta", [](const EngramAE& ae) { return ae.config().eta; })
      .def("encode", &EngramAE::encode)
      .def("decode", &EngramAE::decode)
      .def("reconstruct", &EngramAE::reconstruct)
      .def("characteristic_locations", [](const EngramAE& ae) { return characteristic_locations(ae); })
      .def(
          "sparsity",
          [](const EngramAE& ae, int count, std::uint64_t seed) {
            const SparsityStats s = sparsity_statistics(ae, evaluation_locations(seed, count));
            return py::make_tuple(s.frac_inhibited, s.frac_mid, s.frac_extreme);
          },
          py::arg("count") = 10000, py::arg("seed") = 1, "(inhibited, mid, extreme) fractions.")
      .def(
          "place_field_consistency",
          [](const EngramAE& ae, int grid, double radius) {
            const auto c = place_field_consistency(ae, grid, radius);
            return py::make_tuple(c.consistent, c.bright);
          },
          py::arg("grid") = 101, py::arg("radius") = 0.15)
      .def("save", [](const EngramAE& ae, const std::filesystem::path& p) { save_snapshot(p, ae); })
      .def_static("load", &load_snapshot);

  m.def(
      "train_engram",
      [](int neurons, std::size_t steps, int batch, const std::string& source, double eta, std::uint64_t seed) {
        EngramOptions opt;
        opt.cfg.neurons = neurons;
        opt.cfg.eta = eta;
        opt.steps = steps;
        opt.batch = batch;
        opt.source = parse_location_kind(source);
        py::gil_scoped_release release;
        return train_engram(opt, seed);
      },
      py::arg("neurons") = 1000, py::arg("steps") = 1300000, py::arg("batch") = 8, py::arg("source") = "walk",
      py::arg("eta") = 0.05, py::arg("seed") = 1);

  m.def(
      "density_heatmap", [](const Matrix& points, int bins) { return density_heatmap(points, bins); },
      py::arg("points"), py::arg("bins") = 25);

  m.def(
      "memory_map",
      [](const EngramAE& ae, std::pair<double, double> site, double threshold, int grid) {
        const LtpSynapses syn = form_ltp(ae, to_point(site), threshold);
        std::vector<int> cells;
        for (std::size_t i = 0; i < syn.weights.size(); ++i) {
          if (syn.weights[i]) cells.push_back(static_cast<int>(i));
        }
        return py::make_tuple(cells, memory_heatmap(ae, syn, grid));
      },
      py::arg("model"), py::arg("site") = std::make_pair(0.8, 0.2), py::arg("threshold") = kLtpThreshold,
      py::arg("grid") = 101, "Potentiates cells active at `site`; returns (cells, recall map with rows y).");

  py::class_<GranulePurkinje>(m, "GranulePurkinje")
      .def(py::init<int, double>(), py::arg("n_granule"), py::arg("total") = 1.0)
      .def("__len__", &GranulePurkinje::size)
      .def("enabled", &GranulePurkinje::enabled)
      .def("set_enabled", &GranulePurkinje::set_enabled)
      .def_property_readonly("effective_weight", [](const GranulePurkinje& gp) { return effective_weight(gp); })
      .def(
          "adjust",
          [](GranulePurkinje& gp, double target) {
            const AdjustmentPlan plan = plan_adjustment(gp, target);
            apply(gp, plan);
            py::dict d;
            d["enable"] = plan.enable;
            d["disable"] = plan.disable;
            d["achieved"] = plan.achieved;
            d["residual"] = plan.residual;
            return d;
          },
          py::arg("target"), "Applies the minimal LTP/LTD plan toward `target` and describes it.");

  m.def(
      "run_experiment",
      [](const std::string& name, const py::dict& overrides, std::uint64_t seed, const std::filesystem::path& out) {
        const nlohmann::json hp = nlohmann::json::parse(py::str(py::module_::import("json").attr("dumps")(overrides))
                                                            .cast<std::string>());
        std::ostringstream log;
        bool passed = true;
        {
          py::gil_scoped_release release;
          run_experiment(name, hp, seed, out, log, &passed);
        }
        return py::make_tuple(passed, log.str());
      },
      py::arg("name"), py::arg("overrides") = py::dict(), py::arg("seed") = 1, py::arg("out") = "runs",
      "Runs a CLI command in-process; returns (passed, log).");
}
