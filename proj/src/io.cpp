#include "cortexkit/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#ifndef CORTEXKIT_GIT_DESCRIBE
#define CORTEXKIT_GIT_DESCRIBE "unknown"
#endif

namespace cortexkit {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header.size()) {
    throw std::invalid_argument("CsvTable: row has " + std::to_string(row.size()) +
                                " fields, header has " + std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

void CsvTable::add_numbers(const std::vector<double>& row) {
  std::vector<std::string> fields;
  fields.reserve(row.size());
  for (double v : row) fields.push_back(format_number(v));
  add(std::move(fields));
}

std::string CsvTable::str() const {
  std::string out;
  auto emit = [&](const std::vector<std::string>& rec) {
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(rec[i]);
    }
    out += '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      rec.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(rec));
      rec.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw IoError("parse_csv: unterminated quoted field");
  if (any || !field.empty() || !rec.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw IoError("parse_csv: no header");
  CsvTable t(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw IoError("parse_csv: record " + std::to_string(r) + " has " +
                    std::to_string(records[r].size()) + " fields");
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_csv(const fs::path& path, const CsvTable& table) { write_text(path, table.str()); }

CsvTable grid_csv(const Matrix& map) {
  require_dims(map.rows() == map.cols() && map.rows() >= 2, "grid_csv: need a square map, n >= 2");
  const auto n = map.rows();
  CsvTable t({"x", "y", "value"});
  t.rows.reserve(static_cast<std::size_t>(map.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      t.add_numbers({static_cast<double>(j) / static_cast<double>(n - 1),
                     static_cast<double>(i) / static_cast<double>(n - 1), map(i, j)});
    }
  }
  return t;
}

GrayImage to_gray(const Matrix& values, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("to_gray: empty value range");
  GrayImage img;
  img.height = static_cast<int>(values.rows());
  img.width = static_cast<int>(values.cols());
  img.pixels.resize(static_cast<std::size_t>(values.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double t = std::clamp((values(r, c) - lo) / (hi - lo), 0.0, 1.0);
      img.pixels[static_cast<std::size_t>(r * values.cols() + c)] =
          static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  return out;
}

GrayImage decode_pgm(const std::string& bytes) {
  std::istringstream is(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (!is || magic != "P5" || maxval != 255 || w <= 0 || h <= 0) throw IoError("decode_pgm: bad header");
  is.get();  // single whitespace before the raster
  const auto offset = static_cast<std::size_t>(is.tellg());
  const auto n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < offset + n) throw IoError("decode_pgm: truncated raster");
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                    bytes.begin() + static_cast<std::ptrdiff_t>(offset + n));
  return img;
}

void write_pgm(const fs::path& path, const Matrix& values, double lo, double hi) {
  write_text(path, encode_pgm(to_gray(values, lo, hi)));
}

// ---------------------------------------------------------------------------

namespace {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_ += static_cast<char>((v >> (8 * i)) & 0xff);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_ += static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& s) : s_(s) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(byte(pos_ + i)) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(s_.data() + pos_, p, n) != 0) throw IoError("snapshot: bad magic");
    pos_ += n;
  }
  Matrix matrix(Eigen::Index rows, Eigen::Index cols, const char* what) {
    const auto r = u32();
    const auto c = u32();
    if (r != rows || c != cols) {
      throw IoError(std::string("snapshot: ") + what + " has shape " + std::to_string(r) + "x" +
                    std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
    return m;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  std::uint8_t byte(std::size_t i) const { return static_cast<std::uint8_t>(s_[i]); }
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw IoError("snapshot: truncated file");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_snapshot(const EngramAE& ae) {
  const EngramConfig& c = ae.config();
  ByteWriter w;
  w.raw(kSnapshotMagic, sizeof kSnapshotMagic);
  w.u32(kSnapshotVersion);
  w.i32(c.input_dim);
  w.u32(static_cast<std::uint32_t>(c.encoder_widths.size()));
  for (int width : c.encoder_widths) w.i32(width);
  w.i32(c.neurons);
  for (double v : {c.eta, c.weights.reconstruction, c.weights.engram_sparse, c.weights.time_sparse,
                   c.lambda_long, c.lambda_short, c.long_share, c.short_share, c.lr}) {
    w.f64(v);
  }
  for (const Param* p : ae.params()) w.matrix(p->value);
  w.matrix(ae.long_tracker().average());
  w.matrix(ae.short_tracker().average());
  return w.take();
}

EngramAE decode_snapshot(const std::string& bytes) {
  ByteReader r(bytes);
  r.expect(kSnapshotMagic, sizeof kSnapshotMagic);
  const auto version = r.u32();
  if (version != kSnapshotVersion) {
    throw IoError("snapshot: unsupported version " + std::to_string(version));
  }
  EngramConfig c;
  c.input_dim = r.i32();
  const auto layers = r.u32();
  if (layers > 1024) throw IoError("snapshot: implausible encoder depth");
  c.encoder_widths.resize(layers);
  for (auto& width : c.encoder_widths) width = r.i32();
  c.neurons = r.i32();
  if (c.input_dim <= 0 || c.neurons <= 0 ||
      std::any_of(c.encoder_widths.begin(), c.encoder_widths.end(), [](int v) { return v <= 0; })) {
    throw IoError("snapshot: non-positive layer size");
  }
  c.eta = r.f64();
  c.weights.reconstruction = r.f64();
  c.weights.engram_sparse = r.f64();
  c.weights.time_sparse = r.f64();
  c.lambda_long = r.f64();
  c.lambda_short = r.f64();
  c.long_share = r.f64();
  c.short_share = r.f64();
  c.lr = r.f64();

  Rng scratch(0);
  EngramAE ae(c, scratch);
  for (Param* p : ae.params()) p->value = r.matrix(p->value.rows(), p->value.cols(), "parameter");
  ae.long_tracker().average() = r.matrix(1, c.neurons, "long tracker");
  ae.short_tracker().average() = r.matrix(1, c.neurons, "short tracker");
  if (!r.done()) throw IoError("snapshot: trailing bytes");
  return ae;
}

void save_snapshot(const fs::path& path, const EngramAE& ae) { write_text(path, encode_snapshot(ae)); }

EngramAE load_snapshot(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("snapshot not found: " + path.string());
  return decode_snapshot(read_text(path));
}

// ---------------------------------------------------------------------------

std::string git_describe() { return CORTEXKIT_GIT_DESCRIBE; }

nlohmann::json to_json(const RunManifest& m) {
  return nlohmann::json{{"experiment", m.experiment},
                        {"seed", m.seed},
                        {"hyperparameters", m.hyperparameters},
                        {"git_describe", m.git_describe},
                        {"wall_time_s", m.wall_time_s},
                        {"outputs", m.outputs},
                        {"timing_outputs", m.timing_outputs},
                        {"deterministic", m.deterministic},
                        {"note", m.note}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.experiment = j.at("experiment").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.hyperparameters = j.value("hyperparameters", nlohmann::json::object());
    m.git_describe = j.value("git_describe", std::string{});
    m.wall_time_s = j.value("wall_time_s", 0.0);
    m.outputs = j.value("outputs", std::vector<std::string>{});
    m.timing_outputs = j.value("timing_outputs", std::vector<std::string>{});
    m.deterministic = j.value("deterministic", true);
    m.note = j.value("note", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("manifest: ") + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
  write_text(path, to_json(m).dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace cortexkit
