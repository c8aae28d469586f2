#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cortexkit/biolwbp.hpp"
#include "cortexkit/datasets.hpp"
#include "cortexkit/engram.hpp"
#include "cortexkit/io.hpp"
#include "cortexkit/lwbp.hpp"

namespace cortexkit {

/// Independent generator for one consumer of a run's seed.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);

namespace streams {
inline constexpr std::uint64_t kInit = 0;
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kEval = 3;
inline constexpr std::uint64_t kTargets = 4;
}  // namespace streams

// ---------------------------------------------------------------------------
// 2-D point task

struct Lwbp2dOptions {
  NetworkConfig net{};
  std::size_t steps = 50000;
  int batch = 256;
  double lr = 1e-4;
  int grid_n = 150;
  std::size_t log_every = 1000;
};

struct Lwbp2dResult {
  std::vector<ClassMap> maps;
  std::vector<double> grid_accuracy;   // per module
  std::vector<double> map_change;      // fraction of cells differing from the previous module; 0 for the first
  CsvTable curve{{"step"}};            // step, loss_k..., accuracy_k...
};

Lwbp2dResult run_lwbp_2d(const Lwbp2dOptions& opt, std::uint64_t seed, LwbpNetwork* trained = nullptr);

/// Batch stream of the 2-D task drawn from `rng`, shared by the pipeline runs.
std::function<std::pair<Matrix, Matrix>()> point_stream(Rng& rng, int batch);

// ---------------------------------------------------------------------------
// Image classification comparison

enum class ImageAlgo { Lwbp, LwbpNoShortcut, Bp };
ImageAlgo parse_image_algo(const std::string& name);
std::string to_string(ImageAlgo algo);

struct ImageOptions {
  ImageAlgo algo = ImageAlgo::Lwbp;
  int layers = 12;
  int width = 300;
  Activation act = Activation::Tanh;
  int batch = 256;
  double lr = 1e-4;
  int epochs = 10;
};

struct ImageCurve {
  /// acc[e][k]: training accuracy after epoch e+1 of module k (one column for BP).
  std::vector<std::vector<double>> acc;
  CsvTable csv{{"epoch"}};

  std::vector<double> final_column() const;  // accuracy of the network output per epoch
};

/// Features scaled to [0,1] then standardized per sample.
Matrix image_inputs(const ImageSet& data);

ImageCurve run_image_training(const ImageSet& data, const ImageOptions& opt, std::uint64_t seed);

/// First 1-based epoch whose accuracy reaches `target`, or -1.
int epochs_to_reach(const std::vector<double>& curve, double target);

/// Loads "mnist", "cifar10" or "digits" (an 8x8 IDX set in the MNIST layout)
/// from `dir`, keeping the first `subset` images (0 = all).
ImageSet load_image_dataset(const std::string& name, const std::filesystem::path& dir,
                            std::size_t subset);

/// CORTEXKIT_DATA_DIR when set, otherwise "data".
std::filesystem::path default_data_dir();

// ---------------------------------------------------------------------------
// Biological LWBP

struct BioOptions {
  int width = 900;
  int loss_neurons = 10;
  int modules = 4;
  int batch = 256;
  double lr = 0.01;
  int epochs = 5;
  BioGradientMode mode = BioGradientMode::Consistent;
  bool rmsprop = false;
};

struct BioCurve {
  std::vector<std::vector<double>> acc;  // [epoch][module]
  CsvTable csv{{"epoch"}};
};

BioCurve run_bio_training(const ImageSet& data, const BioOptions& opt, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Engram autoencoder

struct EngramOptions {
  EngramConfig cfg{};
  LocationKind source = LocationKind::Walk;
  std::size_t steps = 1300000;  // about an hour at N=1000 on one core
  int batch = 8;
  std::size_t log_every = 1000;
};

/// Trains from scratch; `curve`, when non-null, receives
/// step,reconstruction,engram_sparse,time_sparse,total rows.
EngramAE train_engram(const EngramOptions& opt, std::uint64_t seed, CsvTable* curve = nullptr);

/// Uniform evaluation locations for the sparsity statistics.
Matrix evaluation_locations(std::uint64_t seed, int count = 10000);

// ---------------------------------------------------------------------------
// Cerebellum

/// Rows of the scenario: start at full weight, silence `disable` synapses.
CsvTable cerebellum_scenario(int n, double total, int disable);
/// Worst residual over `targets` random targets per n, with the total/(2n) bound.
CsvTable cerebellum_precision(const std::vector<int>& sizes, double total, int targets,
                              std::uint64_t seed);

// ---------------------------------------------------------------------------
// Command registry shared by the CLI, the replay command and the tests

struct ExperimentResult {
  std::vector<std::string> outputs;         // byte-reproducible files
  std::vector<std::string> timing_outputs;  // wall-clock dependent files
  bool deterministic = true;
  bool passed = true;  // false turns into exit code 1
  std::string note;
};

using ExperimentFn = std::function<ExperimentResult(const nlohmann::json& hp, std::uint64_t seed,
                                                    const std::filesystem::path& out_dir,
                                                    std::ostream& log)>;

struct ExperimentDef {
  std::string name;
  std::string description;
  nlohmann::json defaults;
  ExperimentFn run;
};

const std::vector<ExperimentDef>& experiments();
const ExperimentDef& find_experiment(const std::string& name);

/// defaults <- overrides; unknown keys and type changes raise invalid_argument.
nlohmann::json merge_hyperparameters(const nlohmann::json& defaults, const nlohmann::json& overrides);

inline constexpr const char* kManifestName = "manifest.json";

/// Runs `name` with merged hyperparameters, writes outputs and the manifest
/// into `out_dir`, and returns the manifest.
RunManifest run_experiment(const std::string& name, const nlohmann::json& overrides,
                           std::uint64_t seed, const std::filesystem::path& out_dir,
                           std::ostream& log, bool* passed = nullptr);

struct ReplayReport {
  RunManifest original;
  RunManifest replay;
  std::vector<std::string> identical;
  std::vector<std::string> differing;
  std::vector<std::string> skipped;  // timing files and async runs
  bool ok() const { return differing.empty(); }
};

/// Re-runs a manifest into `out_dir` and compares the outputs byte for byte.
ReplayReport replay_manifest(const std::filesystem::path& manifest_path,
                             const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace cortexkit
