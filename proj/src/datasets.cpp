#include "cortexkit/datasets.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace cortexkit {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off) {
  return (static_cast<std::uint32_t>(buf[off]) << 24) | (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) | static_cast<std::uint32_t>(buf[off + 3]);
}

void put_be32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v >> 24));
  buf.push_back(static_cast<std::uint8_t>(v >> 16));
  buf.push_back(static_cast<std::uint8_t>(v >> 8));
  buf.push_back(static_cast<std::uint8_t>(v));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

constexpr std::uint32_t kIdxImages = 2051;
constexpr std::uint32_t kIdxLabels = 2049;
constexpr std::size_t kCifarPixels = 3072;

}  // namespace

double point_margin(double x, double y) {
  const double xr = (x + y) / kSqrt2;
  const double yr = (y - x) / kSqrt2;
  return yr - 0.4 * std::sin(4.0 * std::numbers::pi * xr / kSqrt2);
}

int point_label(double x, double y) { return point_margin(x, y) < 0.0 ? 0 : 1; }

LabeledBatch sample_point_batch(Rng& rng, int batch) {
  LabeledBatch out{Matrix(batch, 2), Matrix::Zero(batch, 2)};
  for (int i = 0; i < batch; ++i) {
    const double x = uniform01(rng);
    const double y = uniform01(rng);
    out.x(i, 0) = x;
    out.x(i, 1) = y;
    out.labels(i, point_label(x, y)) = 1.0;
  }
  return out;
}

LabeledBatch point_grid(int n) {
  if (n < 2) throw std::invalid_argument("point_grid: n must be >= 2");
  const auto total = static_cast<Eigen::Index>(n) * n;
  LabeledBatch out{Matrix(total, 2), Matrix::Zero(total, 2)};
  const auto span = static_cast<double>(n - 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * n + j;
      const double x = static_cast<double>(j) / span;
      const double y = static_cast<double>(i) / span;
      out.x(r, 0) = x;
      out.x(r, 1) = y;
      out.labels(r, point_label(x, y)) = 1.0;
    }
  }
  return out;
}

WalkState random_walk_step(const WalkState& s, Rng& rng, double step) {
  for (;;) {
    const double theta = 2.0 * std::numbers::pi * uniform01(rng);
    const double nx = s.pos.x + step * std::cos(theta);
    const double ny = s.pos.y + step * std::sin(theta);
    if (nx >= 0.0 && nx <= 1.0 && ny >= 0.0 && ny <= 1.0) return WalkState{{nx, ny}};
  }
}

Point2 sample_bimodal_gaussian(Rng& rng, int* mode) {
  const int m = uniform01(rng) < 0.5 ? 0 : 1;
  if (mode) *mode = m;
  const auto& g = kGaussianModes[m];
  const double sd = std::sqrt(g.variance);
  const double dx = standard_normal(rng);
  const double dy = standard_normal(rng);
  return {g.mean.x + sd * dx, g.mean.y + sd * dy};
}

LocationKind parse_location_kind(const std::string& name) {
  if (name == "walk") return LocationKind::Walk;
  if (name == "uniform") return LocationKind::Uniform;
  if (name == "gaussian2") return LocationKind::Gaussian2;
  throw std::invalid_argument("unknown location source '" + name + "'");
}

std::string to_string(LocationKind kind) {
  switch (kind) {
    case LocationKind::Walk: return "walk";
    case LocationKind::Uniform: return "uniform";
    case LocationKind::Gaussian2: return "gaussian2";
  }
  return "?";
}

LocationSource::LocationSource(LocationKind kind, int batch, Rng rng)
    : kind_(kind), batch_(batch), rng_(std::move(rng)) {
  if (batch <= 0) throw std::invalid_argument("LocationSource: batch must be positive");
  if (kind_ == LocationKind::Walk) {
    walkers_.resize(static_cast<std::size_t>(batch));
    for (auto& w : walkers_) w.pos = {uniform01(rng_), uniform01(rng_)};
  }
}

Matrix LocationSource::next() {
  Matrix out(batch_, 2);
  for (int i = 0; i < batch_; ++i) {
    Point2 p;
    switch (kind_) {
      case LocationKind::Walk: {
        auto& w = walkers_[static_cast<std::size_t>(i)];
        w = random_walk_step(w, rng_);
        p = w.pos;
        break;
      }
      case LocationKind::Uniform: p = {uniform01(rng_), uniform01(rng_)}; break;
      case LocationKind::Gaussian2: p = sample_bimodal_gaussian(rng_); break;
    }
    out(i, 0) = p.x;
    out(i, 1) = p.y;
  }
  return out;
}

Matrix ImageSet::features() const {
  const auto n = static_cast<Eigen::Index>(count());
  const auto d = static_cast<Eigen::Index>(dim());
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n * d; ++i) out.data()[i] = pixels[static_cast<std::size_t>(i)] / 255.0;
  return out;
}

Matrix ImageSet::one_hot_labels(int classes) const {
  return one_hot(std::vector<int>(labels.begin(), labels.end()), classes);
}

ImageSet ImageSet::head(std::size_t n) const {
  ImageSet out = *this;
  n = std::min(n, count());
  out.labels.resize(n);
  out.pixels.resize(n * static_cast<std::size_t>(dim()));
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageSet load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file_bytes(images);
  const auto lab = read_file_bytes(labels);
  if (img.size() < 16) throw DataError(images.string() + ": truncated IDX header");
  if (lab.size() < 8) throw DataError(labels.string() + ": truncated IDX header");
  if (read_be32(img, 0) != kIdxImages) {
    throw DataError(images.string() + ": bad magic " + std::to_string(read_be32(img, 0)));
  }
  if (read_be32(lab, 0) != kIdxLabels) {
    throw DataError(labels.string() + ": bad magic " + std::to_string(read_be32(lab, 0)));
  }
  const std::size_t n = read_be32(img, 4);
  ImageSet set;
  set.rows = static_cast<int>(read_be32(img, 8));
  set.cols = static_cast<int>(read_be32(img, 12));
  const std::size_t need = 16 + n * static_cast<std::size_t>(set.rows * set.cols);
  if (img.size() != need) {
    throw DataError(images.string() + ": expected " + std::to_string(need) + " bytes, found " +
                    std::to_string(img.size()));
  }
  const std::size_t nl = read_be32(lab, 4);
  if (nl != n) throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " + std::to_string(nl));
  if (lab.size() != 8 + n) throw DataError(labels.string() + ": truncated label data");
  set.pixels.assign(img.begin() + 16, img.end());
  set.labels.assign(lab.begin() + 8, lab.end());
  return set;
}

ImageSet load_cifar10(const std::filesystem::path& batch_file) {
  const auto bytes = read_file_bytes(batch_file);
  constexpr std::size_t record = kCifarPixels + 1;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw DataError(batch_file.string() + ": length " + std::to_string(bytes.size()) +
                    " is not a multiple of " + std::to_string(record));
  }
  ImageSet set;
  set.rows = 32;
  set.cols = 32;
  set.channels = 3;
  const std::size_t n = bytes.size() / record;
  set.labels.reserve(n);
  set.pixels.reserve(n * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * record;
    if (rec[0] > 9) throw DataError(batch_file.string() + ": label out of range at record " + std::to_string(i));
    set.labels.push_back(rec[0]);
    set.pixels.insert(set.pixels.end(), rec + 1, rec + record);
  }
  return set;
}

ImageSet load_cifar10(const std::vector<std::filesystem::path>& batch_files) {
  ImageSet all;
  for (const auto& f : batch_files) {
    ImageSet part = load_cifar10(f);
    if (all.labels.empty()) {
      all = std::move(part);
      continue;
    }
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    all.pixels.insert(all.pixels.end(), part.pixels.begin(), part.pixels.end());
  }
  return all;
}

void write_idx_images(const std::filesystem::path& path, const ImageSet& set) {
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + set.pixels.size());
  put_be32(buf, kIdxImages);
  put_be32(buf, static_cast<std::uint32_t>(set.count()));
  put_be32(buf, static_cast<std::uint32_t>(set.rows));
  put_be32(buf, static_cast<std::uint32_t>(set.cols));
  buf.insert(buf.end(), set.pixels.begin(), set.pixels.end());
  write_bytes(path, buf);
}

void write_idx_labels(const std::filesystem::path& path, const ImageSet& set) {
  std::vector<std::uint8_t> buf;
  put_be32(buf, kIdxLabels);
  put_be32(buf, static_cast<std::uint32_t>(set.count()));
  buf.insert(buf.end(), set.labels.begin(), set.labels.end());
  write_bytes(path, buf);
}

void write_cifar10(const std::filesystem::path& path, const ImageSet& set) {
  if (static_cast<std::size_t>(set.dim()) != kCifarPixels) {
    throw DataError("write_cifar10: images must be 32x32x3");
  }
  std::vector<std::uint8_t> buf;
  buf.reserve(set.count() * (kCifarPixels + 1));
  for (std::size_t i = 0; i < set.count(); ++i) {
    buf.push_back(set.labels[i]);
    const auto* px = set.pixels.data() + i * kCifarPixels;
    buf.insert(buf.end(), px, px + kCifarPixels);
  }
  write_bytes(path, buf);
}

}  // namespace cortexkit
