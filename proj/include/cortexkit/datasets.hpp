#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cortexkit/matrix.hpp"

namespace cortexkit {

/// Raised for missing, truncated, or malformed data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// 2-D point classification task

/// Rotated-sine boundary. Coordinates are rotated by -45 degrees,
/// x' = (x + y)/sqrt2, y' = (y - x)/sqrt2, and points strictly below
/// y' = 0.4 sin(4 pi x' / sqrt2) get label 0. Points on the curve get label 1.
int point_label(double x, double y);

/// Signed distance-like margin y' - curve(x'); negative means label 0.
double point_margin(double x, double y);

struct LabeledBatch {
  Matrix x;       // [B x 2]
  Matrix labels;  // [B x 2] one-hot
};

/// Uniform points in the unit square with one-hot boundary labels.
LabeledBatch sample_point_batch(Rng& rng, int batch);

/// Regular n x n grid over [0,1]^2 with labels, row-major in y then x.
LabeledBatch point_grid(int n);

// ---------------------------------------------------------------------------
// Location sources for the engram experiments

struct WalkState {
  Point2 pos{0.5, 0.5};
};

inline constexpr double kWalkStep = 0.02;

/// Moves `step` in a uniformly random direction; directions that would leave
/// the unit box are redrawn.
WalkState random_walk_step(const WalkState& s, Rng& rng, double step = kWalkStep);

struct GaussianMode {
  Point2 mean;
  double variance;  // isotropic covariance diagonal
};

inline constexpr GaussianMode kGaussianModes[2] = {{{0.3, 0.3}, 0.08}, {{0.6, 0.6}, 0.1}};

/// Picks one of the two modes with probability 1/2 and samples it. Samples
/// outside the unit box are kept. `mode`, when non-null, receives 0 or 1.
Point2 sample_bimodal_gaussian(Rng& rng, int* mode = nullptr);

enum class LocationKind { Walk, Uniform, Gaussian2 };

LocationKind parse_location_kind(const std::string& name);
std::string to_string(LocationKind kind);

/// Produces [B x 2] location batches. The walk source advances a fixed pool
/// of independent walkers by one step per batch, one walker per row.
class LocationSource {
 public:
  LocationSource(LocationKind kind, int batch, Rng rng);

  LocationKind kind() const { return kind_; }
  Matrix next();

 private:
  LocationKind kind_;
  int batch_;
  Rng rng_;
  std::vector<WalkState> walkers_;
};

// ---------------------------------------------------------------------------
// Image datasets

struct ImageSet {
  int rows = 0;
  int cols = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;  // count * rows * cols * channels
  std::vector<std::uint8_t> labels;

  std::size_t count() const { return labels.size(); }
  int dim() const { return rows * cols * channels; }

  /// Pixels scaled to [0,1], one image per row.
  Matrix features() const;
  Matrix one_hot_labels(int classes = 10) const;
  ImageSet head(std::size_t n) const;
};

/// Parses an IDX image file (magic 2051) and IDX label file (magic 2049).
ImageSet load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Parses one CIFAR-10 binary batch: records of 1 label byte + 3072 pixel bytes.
ImageSet load_cifar10(const std::filesystem::path& batch_file);
ImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_files);

void write_idx_images(const std::filesystem::path& path, const ImageSet& set);
void write_idx_labels(const std::filesystem::path& path, const ImageSet& set);
void write_cifar10(const std::filesystem::path& path, const ImageSet& set);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace cortexkit
