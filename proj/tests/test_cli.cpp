#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "cortexkit/experiments.hpp"
#include "cortexkit/io.hpp"

using namespace cortexkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + CORTEXKIT_CLI_PATH + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return o;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) o.out.append(buf.data(), n);
  const int status = pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cortexkit_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

TEST(Registry, CommandsAndDefaults) {
  for (const char* name : {"gradcheck", "train-lwbp-2d", "train-lwbp-img", "train-bio-lwbp", "train-engram",
                           "memory-map", "cerebellum-demo", "pipeline-bench"}) {
    EXPECT_NO_THROW(find_experiment(name)) << name;
  }
  const auto& lw = find_experiment("train-lwbp-2d").defaults;
  EXPECT_EQ(lw.at("modules"), 5);
  EXPECT_EQ(lw.at("width"), 16);
  EXPECT_EQ(lw.at("act"), "leakyrelu");
  EXPECT_EQ(lw.at("batch"), 256);
  EXPECT_EQ(lw.at("lr"), 1e-4);
  const auto& en = find_experiment("train-engram").defaults;
  EXPECT_EQ(en.at("neurons"), 1000);
  EXPECT_EQ(en.at("eta"), 0.05);
  EXPECT_EQ(find_experiment("memory-map").defaults.at("site"), "0.8,0.2");
  const auto& bio = find_experiment("train-bio-lwbp").defaults;
  EXPECT_EQ(bio.at("width").get<int>() / bio.at("loss_neurons").get<int>(), 90);
  EXPECT_THROW(find_experiment("nope"), std::invalid_argument);
}

TEST(Registry, MergeRejectsUnknownKeysAndTypeChanges) {
  const json d = {{"steps", 10}, {"lr", 0.1}, {"name", "a"}};
  const json m = merge_hyperparameters(d, {{"steps", 20}, {"lr", 1}});
  EXPECT_EQ(m.at("steps"), 20);
  EXPECT_EQ(m.at("lr").get<double>(), 1.0);
  EXPECT_THROW(merge_hyperparameters(d, {{"stepz", 1}}), std::invalid_argument);
  EXPECT_THROW(merge_hyperparameters(d, {{"name", 3}}), std::invalid_argument);
}

TEST(Cli, GradcheckPassesAndMutationFails) {
  const fs::path dir = fresh_dir("gc");
  const Outcome ok = run_cli("gradcheck --out " + dir.string());
  EXPECT_EQ(ok.code, 0) << ok.out;
  const CsvTable t = parse_csv(read_text(dir / "gradcheck.csv"));
  EXPECT_GE(t.rows.size(), 6u);
  const Outcome bad = run_cli("gradcheck --inject alpha-sign --out " + (dir / "bad").string());
  EXPECT_EQ(bad.code, 1) << bad.out;
  EXPECT_TRUE(contains(bad.out, "FAIL"));
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fresh_dir("codes");
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("no-such-command").code, 1);
  EXPECT_EQ(run_cli("train-lwbp-2d --steps abc --out " + dir.string()).code, 1);
  EXPECT_EQ(run_cli("train-lwbp-2d --bogus 1 --out " + dir.string()).code, 1);
  const Outcome w = run_cli("train-bio-lwbp --width 899 --out " + dir.string());
  EXPECT_EQ(w.code, 1) << w.out;
  const Outcome data = run_cli("train-lwbp-img --dataset mnist --out " + dir.string(),
                               "CORTEXKIT_DATA_DIR=" + (dir / "empty").string());
  EXPECT_EQ(data.code, 2) << data.out;
  const Outcome model = run_cli("memory-map --model " + (dir / "missing.bin").string() + " --out " + dir.string());
  EXPECT_EQ(model.code, 2) << model.out;
  EXPECT_EQ(run_cli("replay " + (dir / "nothing.json").string()).code, 2);
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const fs::path dir = fresh_dir("precedence");
  write_text(dir / "cfg.json", R"({"steps": 7, "lr": 0.01, "seed": 9, "grid": 20, "log_every": 1})");
  const Outcome a = run_cli("train-lwbp-2d --config " + (dir / "cfg.json").string() + " --steps 3 --out " +
                            (dir / "run").string());
  ASSERT_EQ(a.code, 0) << a.out;
  const RunManifest m = read_manifest(dir / "run" / kManifestName);
  EXPECT_EQ(m.hyperparameters.at("steps"), 3);   // flag beats config
  EXPECT_EQ(m.hyperparameters.at("lr"), 0.01);   // config beats default
  EXPECT_EQ(m.hyperparameters.at("width"), 16);  // default
  EXPECT_EQ(m.seed, 9u);
  int maps = 0;
  for (const auto& f : m.outputs) maps += f.rfind("class_map_module_", 0) == 0;
  EXPECT_EQ(maps, 5);
  EXPECT_TRUE(fs::exists(dir / "run" / "metrics.csv"));
}

TEST(Cli, ReplayReproducesBytes) {
  const fs::path dir = fresh_dir("replay");
  ASSERT_EQ(run_cli("train-lwbp-2d --steps 20 --grid 30 --log-every 5 --seed 4 --out " + (dir / "a").string()).code, 0);
  const Outcome r = run_cli("replay " + (dir / "a" / kManifestName).string() + " --out " + (dir / "b").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_FALSE(contains(r.out, "DIFFERENT"));
  EXPECT_TRUE(contains(r.out, "IDENTICAL metrics.csv"));
}

TEST(Cli, CerebellumTable) {
  const fs::path dir = fresh_dir("cereb");
  const Outcome o = run_cli("cerebellum-demo --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.out;
  const CsvTable t = parse_csv(read_text(dir / "cerebellum_scenario.csv"));
  bool seen = false;
  for (const auto& row : t.rows) {
    for (const auto& f : row) seen |= f == "0.7";
  }
  EXPECT_TRUE(seen);
}

TEST(Cli, PipelineBenchVerdicts) {
  const fs::path dir = fresh_dir("pipe");
  const Outcome s = run_cli("pipeline-bench --steps 20 --out " + (dir / "sync").string());
  EXPECT_EQ(s.code, 0) << s.out;
  EXPECT_TRUE(contains(s.out, "IDENTICAL"));
  const auto csv = parse_csv(read_text(dir / "sync" / "throughput.csv"));
  EXPECT_EQ(csv.header.front(), "stage");

  const Outcome a = run_cli("pipeline-bench --mode async --capacity 3 --steps 20 --out " + (dir / "async").string());
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_TRUE(contains(a.out, "max staleness"));
  EXPECT_FALSE(read_manifest(dir / "async" / kManifestName).deterministic);
}

TEST(Cli, MemoryMapOnSavedModel) {
  const fs::path dir = fresh_dir("memory");
  EngramConfig cfg;
  cfg.encoder_widths = {};
  cfg.neurons = 4;
  cfg.eta = 0.25;
  Rng rng(1);
  EngramAE ae(cfg, rng);
  auto& w = ae.engram_layer().weight().value;
  w << 40, 0, -40, 0, 0, -40, 0, 40;
  ae.engram_layer().bias().value << -28, 12, 12, -28;
  save_snapshot(dir / "model.bin", ae);
  const Outcome o = run_cli("memory-map --model " + (dir / "model.bin").string() + " --out " + (dir / "out").string());
  ASSERT_EQ(o.code, 0) << o.out;
  const CsvTable heat = parse_csv(read_text(dir / "out" / "memory_heatmap.csv"));
  EXPECT_EQ(heat.rows.size(), 10201u);
  EXPECT_TRUE(contains(o.out, "recall peak"));
  const GrayImage img = decode_pgm(read_text(dir / "out" / "memory_heatmap.pgm"));
  EXPECT_EQ(img.width, 101);
}

TEST(Cli, TrainEngramWritesAnalysisFiles) {
  const fs::path dir = fresh_dir("engram");
  const Outcome o = run_cli("train-engram --neurons 40 --steps 30 --log-every 10 --out " + dir.string());
  ASSERT_EQ(o.code, 0) << o.out;
  const CsvTable sp = parse_csv(read_text(dir / "sparsity.csv"));
  EXPECT_EQ(sp.header.size(), 3u);
  for (const char* f : {"loss.csv", "engram.bin", "characteristic_locations.csv", "density.csv", "density.pgm"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_snapshot(dir / "engram.bin").neurons(), 40);
}

TEST(Cli, DigitsDatasetFromDataDir) {
  const fs::path dir = fresh_dir("digits");
  const Outcome o = run_cli("train-lwbp-img --dataset digits --subset 300 --layers 3 --width 16 --epochs 2 --out " +
                                dir.string(),
                            std::string("CORTEXKIT_DATA_DIR=") + CORTEXKIT_TEST_DATA);
  ASSERT_EQ(o.code, 0) << o.out;
  const CsvTable t = parse_csv(read_text(dir / "accuracy.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"epoch", "module_0", "module_1", "module_2"}));
  EXPECT_EQ(t.rows.size(), 2u);
}
