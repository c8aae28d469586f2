#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cortexkit/engram.hpp"

namespace cortexkit {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// CSV (RFC 4180: comma separated, CRLF-free LF lines are accepted by every
// reader we care about, fields quoted only when needed)

/// Shortest round-trip decimal form, '.' separator.
std::string format_number(double v);
std::string csv_escape(const std::string& field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  explicit CsvTable(std::vector<std::string> h) : header(std::move(h)) {}
  void add(std::vector<std::string> row);
  void add_numbers(const std::vector<double>& row);
  std::string str() const;
};

/// Parses RFC 4180 text; the first record becomes the header.
CsvTable parse_csv(const std::string& text);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// n x n map as `x,y,value` rows; cell (i, j) sits at x = j/(n-1), y = i/(n-1).
CsvTable grid_csv(const Matrix& map);

// ---------------------------------------------------------------------------
// Binary PGM (P5, maxval 255)

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top row first
};

/// Linear map [lo, hi] -> [0, 255] with clamping; matrix row 0 is the top row.
GrayImage to_gray(const Matrix& values, double lo, double hi);
std::string encode_pgm(const GrayImage& img);
GrayImage decode_pgm(const std::string& bytes);
void write_pgm(const std::filesystem::path& path, const Matrix& values, double lo, double hi);

// ---------------------------------------------------------------------------
// EngramAE snapshot: little-endian, magic "CKENGRAM", format version, config,
// then every parameter matrix as (u32 rows, u32 cols, f64 row-major values)
// followed by the two tracker vectors.

inline constexpr char kSnapshotMagic[8] = {'C', 'K', 'E', 'N', 'G', 'R', 'A', 'M'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

std::string encode_snapshot(const EngramAE& ae);
EngramAE decode_snapshot(const std::string& bytes);
void save_snapshot(const std::filesystem::path& path, const EngramAE& ae);
EngramAE load_snapshot(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Run manifest

/// Build-time `git describe --always --dirty`, or "unknown".
std::string git_describe();

struct RunManifest {
  std::string experiment;
  std::uint64_t seed = 0;
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::string git_describe;
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;         // file names relative to the output directory
  std::vector<std::string> timing_outputs;  // wall-clock dependent, excluded from replay checks
  bool deterministic = true;         // false for async pipeline runs
  std::string note;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace cortexkit
