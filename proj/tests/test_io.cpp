#include <bit>
#include <cstring>
#include <filesystem>

#include <gtest/gtest.h>

#include "cortexkit/io.hpp"

using namespace cortexkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cortexkit_tests";
  fs::create_directories(dir);
  return dir / name;
}

EngramAE small_model(std::uint64_t seed) {
  EngramConfig cfg;
  cfg.encoder_widths = {5, 3};
  cfg.neurons = 7;
  cfg.eta = 0.2;
  cfg.lambda_short = 0.95;
  Rng rng(seed);
  EngramAE ae(cfg, rng);
  ae.long_tracker().average()(3) = 0.31;
  return ae;
}

}  // namespace

TEST(Csv, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Csv, EscapingAndParsing) {
  CsvTable t({"name", "value"});
  t.add({"plain", "1"});
  t.add({"with,comma", "2"});
  t.add({"with \"quote\"", "3"});
  t.add({"multi\nline", "4"});
  const std::string text = t.str();
  EXPECT_EQ(text.substr(0, 11), "name,value\n");
  const CsvTable back = parse_csv(text);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_THROW(t.add({"too", "many", "fields"}), std::invalid_argument);
}

TEST(Csv, GridRowsAreXYValue) {
  Matrix m(3, 3);
  m << 0, 1, 2, 3, 4, 5, 6, 7, 8;
  const CsvTable t = grid_csv(m);
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y", "value"}));
  ASSERT_EQ(t.rows.size(), 9u);
  EXPECT_EQ(t.rows[5], (std::vector<std::string>{"1", "0.5", "5"}));
}

TEST(Csv, WriteAndReadFile) {
  const fs::path p = scratch("nested/dir/t.csv");
  fs::remove_all(scratch("nested"));
  CsvTable t({"a"});
  t.add_numbers({2.25});
  write_csv(p, t);
  EXPECT_EQ(read_text(p), "a\n2.25\n");
  EXPECT_THROW(read_text(scratch("nope.csv")), IoError);
}

TEST(Pgm, LinearMapWithClamping) {
  Matrix v(1, 5);
  v << -1.0, 0.0, 0.5, 1.0, 2.0;
  const GrayImage g = to_gray(v, 0.0, 1.0);
  EXPECT_EQ(g.pixels, (std::vector<std::uint8_t>{0, 0, 128, 255, 255}));
}

TEST(Pgm, EncodeDecodeRoundTrip) {
  GrayImage g{3, 2, {0, 10, 20, 30, 40, 255}};
  const std::string bytes = encode_pgm(g);
  EXPECT_EQ(bytes.substr(0, 11), "P5\n3 2\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 6u);
  const GrayImage back = decode_pgm(bytes);
  EXPECT_EQ(back.width, 3);
  EXPECT_EQ(back.height, 2);
  EXPECT_EQ(back.pixels, g.pixels);
  EXPECT_THROW(decode_pgm("P2\n1 1\n255\n0"), IoError);
  EXPECT_THROW(decode_pgm(bytes.substr(0, bytes.size() - 1)), IoError);
}

TEST(Snapshot, RoundTripIsExact) {
  const EngramAE ae = small_model(3);
  const std::string bytes = encode_snapshot(ae);
  EXPECT_EQ(bytes.substr(0, 8), "CKENGRAM");
  const EngramAE back = decode_snapshot(bytes);
  EXPECT_EQ(encode_snapshot(back), bytes);
  EXPECT_EQ(back.config().encoder_widths, ae.config().encoder_widths);
  EXPECT_EQ(back.config().lambda_short, 0.95);
  const auto pa = ae.params();
  const auto pb = back.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(bit_equal(pa[i]->value, pb[i]->value));
  EXPECT_TRUE(bit_equal(back.long_tracker().average(), ae.long_tracker().average()));
  Matrix x(2, 2);
  x << 0.1, 0.9, 0.5, 0.5;
  EXPECT_TRUE(bit_equal(back.encode(x), ae.encode(x)));
}

TEST(Snapshot, LittleEndianLayout) {
  const EngramAE ae = small_model(4);
  const std::string bytes = encode_snapshot(ae);
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int b = 3; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(bytes[off + static_cast<std::size_t>(b)]);
    return v;
  };
  EXPECT_EQ(u32_at(8), kSnapshotVersion);
  EXPECT_EQ(u32_at(12), 2u);  // input_dim
}

TEST(Snapshot, CorruptInputRejected) {
  const std::string bytes = encode_snapshot(small_model(5));
  EXPECT_THROW(decode_snapshot(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(decode_snapshot(bytes + "x"), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_snapshot(bad), IoError);
  EXPECT_THROW(load_snapshot(scratch("missing.bin")), IoError);
  save_snapshot(scratch("model.bin"), small_model(5));
  EXPECT_EQ(encode_snapshot(load_snapshot(scratch("model.bin"))), bytes);
}

TEST(Manifest, JsonRoundTrip) {
  RunManifest m;
  m.experiment = "train-engram";
  m.seed = 18446744073709551615ull;
  m.hyperparameters = {{"steps", 10}, {"lr", 1e-4}, {"source", "walk"}};
  m.git_describe = "abc123";
  m.wall_time_s = 1.5;
  m.outputs = {"loss.csv", "engram.bin"};
  m.timing_outputs = {"throughput.csv"};
  m.deterministic = false;
  m.note = "async";
  const fs::path p = scratch("manifest.json");
  write_manifest(p, m);
  const RunManifest back = read_manifest(p);
  EXPECT_EQ(back.experiment, m.experiment);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.hyperparameters, m.hyperparameters);
  EXPECT_EQ(back.outputs, m.outputs);
  EXPECT_EQ(back.timing_outputs, m.timing_outputs);
  EXPECT_FALSE(back.deterministic);
  EXPECT_EQ(back.note, "async");
  EXPECT_FALSE(git_describe().empty());
}
