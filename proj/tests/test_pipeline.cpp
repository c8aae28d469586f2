#include <atomic>
#include <thread>

#include <gtest/gtest.h>

#include "cortexkit/experiments.hpp"
#include "cortexkit/pipeline.hpp"

using namespace cortexkit;

namespace {

NetworkConfig net_cfg(int modules) {
  NetworkConfig cfg;
  cfg.modules = modules;
  cfg.width = 16;
  return cfg;
}

bool params_equal(LwbpNetwork& a, LwbpNetwork& b) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto pa = a.module(k).params();
    const auto pb = b.module(k).params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (!bit_equal(pa[i]->value, pb[i]->value)) return false;
    }
  }
  return true;
}

struct Trial {
  LwbpNetwork net;
  std::vector<ModuleMetrics> metrics;
};

Trial sequential(int modules, std::size_t steps, std::uint64_t seed) {
  Rng init = derive_rng(seed, streams::kInit);
  Rng data = derive_rng(seed, streams::kData);
  Trial t{LwbpNetwork(net_cfg(modules), init), {}};
  auto stream = point_stream(data, 64);
  for (std::size_t s = 0; s < steps; ++s) {
    auto [x, y] = stream();
    t.metrics.push_back(t.net.train_step(x, y, 1e-3));
  }
  return t;
}

Trial piped(int modules, std::size_t steps, std::uint64_t seed, PipelineMode mode, std::size_t cap,
            PipelineRun* run_out = nullptr) {
  Rng init = derive_rng(seed, streams::kInit);
  Rng data = derive_rng(seed, streams::kData);
  Trial t{LwbpNetwork(net_cfg(modules), init), {}};
  auto run = run_pipeline(t.net, point_stream(data, 64), steps, PipelineConfig{mode, cap, 1e-3});
  t.metrics = run.metrics;
  if (run_out) *run_out = run;
  return t;
}

void expect_same_metrics(const std::vector<ModuleMetrics>& a, const std::vector<ModuleMetrics>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t s = 0; s < a.size(); ++s) {
    EXPECT_EQ(a[s].loss, b[s].loss) << "batch " << s;
    EXPECT_EQ(a[s].accuracy, b[s].accuracy) << "batch " << s;
  }
}

}  // namespace

TEST(BoundedQueue, FifoAndClose) {
  BoundedQueue<int> q(3);
  EXPECT_TRUE(q.push(1));
  EXPECT_TRUE(q.push(2));
  auto a = q.pop();
  ASSERT_TRUE(a);
  EXPECT_EQ(a->first, 1);
  EXPECT_EQ(a->second, 2u);
  q.close();
  EXPECT_FALSE(q.push(9));
  auto b = q.pop();
  ASSERT_TRUE(b);
  EXPECT_EQ(b->first, 2);  // drains after close
  EXPECT_FALSE(q.pop());
  EXPECT_THROW(BoundedQueue<int>(0), std::invalid_argument);
}

TEST(BoundedQueue, BlockingPushRespectsCapacity) {
  BoundedQueue<int> q(2);
  std::atomic<int> pushed{0};
  std::thread producer([&] {
    for (int i = 0; i < 10; ++i) {
      q.push(i);
      ++pushed;
    }
    q.close();
  });
  std::vector<int> got;
  while (auto item = q.pop()) {
    // pushed_total - consumed never exceeds the capacity
    EXPECT_LE(item->second - got.size() - 1, 1u);
    got.push_back(item->first);
  }
  producer.join();
  ASSERT_EQ(got.size(), 10u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(got[static_cast<std::size_t>(i)], i);
}

TEST(Pipeline, SingleModuleSyncEqualsSequential) {
  Trial seq = sequential(1, 20, 3);
  Trial syn = piped(1, 20, 3, PipelineMode::Sync, 1);
  EXPECT_TRUE(params_equal(seq.net, syn.net));
  expect_same_metrics(seq.metrics, syn.metrics);
}

TEST(Pipeline, FiveModuleSyncBitEqualAfterHundredBatches) {
  Trial seq = sequential(5, 100, 1);
  Trial syn = piped(5, 100, 1, PipelineMode::Sync, 1);
  EXPECT_TRUE(params_equal(seq.net, syn.net));
  expect_same_metrics(seq.metrics, syn.metrics);
}

TEST(Pipeline, SyncRepeatsIdentically) {
  Trial a = piped(4, 30, 5, PipelineMode::Sync, 1);
  Trial b = piped(4, 30, 5, PipelineMode::Sync, 1);
  expect_same_metrics(a.metrics, b.metrics);
}

TEST(Pipeline, SyncStagesProcessEqualCounts) {
  PipelineRun run;
  piped(5, 25, 2, PipelineMode::Sync, 7, &run);
  const auto rep = throughput_report(run);
  ASSERT_EQ(rep.stages.size(), 5u);
  for (const auto& s : rep.stages) EXPECT_EQ(s.batches, 25u);
  for (double u : rep.utilization) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
  }
}

TEST(Pipeline, AsyncCapacityOneMatchesSync) {
  PipelineRun run;
  Trial seq = sequential(3, 40, 4);
  Trial asy = piped(3, 40, 4, PipelineMode::Async, 1, &run);
  EXPECT_TRUE(params_equal(seq.net, asy.net));
  for (const auto& s : run.stages) EXPECT_EQ(s.max_staleness, 0u);
}

TEST(Pipeline, AsyncStalenessBoundedByCapacity) {
  for (std::size_t cap : {2u, 4u}) {
    PipelineRun run;
    piped(5, 60, 6, PipelineMode::Async, cap, &run);
    for (const auto& s : run.stages) {
      EXPECT_EQ(s.batches, 60u);
      EXPECT_LE(s.max_staleness, cap);
      EXPECT_LE(s.mean_staleness, static_cast<double>(s.max_staleness));
    }
  }
}

TEST(Pipeline, AsyncKeepsLocality) {
  // Stages only exchange activations, so every module still learns exactly
  // what the sequential trainer would have it learn.
  Trial seq = sequential(4, 50, 8);
  Trial asy = piped(4, 50, 8, PipelineMode::Async, 4);
  EXPECT_TRUE(params_equal(seq.net, asy.net));
}

TEST(Pipeline, StageFailureNamesStage) {
  Rng init(1);
  LwbpNetwork net(net_cfg(3), init);
  int calls = 0;
  BatchStream bad = [&]() -> std::pair<Matrix, Matrix> {
    if (++calls == 3) return {Matrix::Zero(4, 5), one_hot({0, 1, 0, 1}, 2)};
    return {Matrix::Zero(4, 2), one_hot({0, 1, 0, 1}, 2)};
  };
  for (auto mode : {PipelineMode::Sync, PipelineMode::Async}) {
    calls = 0;
    try {
      run_pipeline(net, bad, 10, PipelineConfig{mode, 2, 1e-3});
      FAIL() << "expected a PipelineError";
    } catch (const PipelineError& e) {
      EXPECT_EQ(e.stage(), 0);
      EXPECT_NE(std::string(e.what()).find("stage 0"), std::string::npos);
    }
  }
}

TEST(Pipeline, ThroughputCsvSchema) {
  PipelineRun run;
  piped(2, 5, 1, PipelineMode::Sync, 1, &run);
  const std::string csv = throughput_csv(throughput_report(run));
  const CsvTable t = parse_csv(csv);
  EXPECT_EQ(t.header, (std::vector<std::string>{"stage", "batches", "busy_s", "idle_s", "max_staleness"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "0");
  EXPECT_EQ(t.rows[1][1], "5");
}

TEST(Pipeline, ModeNames) {
  EXPECT_EQ(parse_pipeline_mode("sync"), PipelineMode::Sync);
  EXPECT_EQ(parse_pipeline_mode("async"), PipelineMode::Async);
  EXPECT_THROW(parse_pipeline_mode("turbo"), std::invalid_argument);
}
