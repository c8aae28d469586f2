#include "cortexkit/pipeline.hpp"

#include <array>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cstdio>
#include <exception>
#include <memory>
#include <sstream>
#include <thread>

namespace cortexkit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

PipelineRun make_run(PipelineMode mode, std::size_t capacity, std::size_t stages, std::size_t steps) {
  PipelineRun run;
  run.mode = mode;
  run.queue_capacity = capacity;
  run.stages.resize(stages);
  run.metrics.resize(steps);
  for (auto& m : run.metrics) {
    m.loss.assign(stages, 0.0);
    m.accuracy.assign(stages, 0.0);
  }
  return run;
}

void finish_staleness(StageStats& s, double staleness_sum) {
  s.mean_staleness = s.batches ? staleness_sum / static_cast<double>(s.batches) : 0.0;
}

// First failure wins; later ones are usually fallout from shutdown.
struct ErrorSlot {
  std::mutex mu;
  std::exception_ptr error;
  int stage = -1;

  void set(int k, std::exception_ptr e) {
    std::lock_guard lock(mu);
    if (!error) {
      error = e;
      stage = k;
    }
  }

  void rethrow() {
    if (!error) return;
    try {
      std::rethrow_exception(error);
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(stage, e.what());
    } catch (...) {
      throw PipelineError(stage, "unknown error");
    }
  }
};

}  // namespace

PipelineMode parse_pipeline_mode(const std::string& name) {
  if (name == "sync") return PipelineMode::Sync;
  if (name == "async") return PipelineMode::Async;
  throw std::invalid_argument("unknown pipeline mode '" + name + "' (expected sync|async)");
}

std::string to_string(PipelineMode mode) { return mode == PipelineMode::Sync ? "sync" : "async"; }

PipelineRun run_sync(LwbpNetwork& net, const BatchStream& stream, std::size_t steps, double lr) {
  const std::size_t K = net.size();
  if (K == 0) throw std::invalid_argument("run_sync: empty network");
  PipelineRun run = make_run(PipelineMode::Sync, 1, K, steps);
  if (steps == 0) return run;

  // slots[k][parity]: packet waiting for stage k. Stage k-1 writes batch t
  // during tick t+k-1; stage k reads it during tick t+k. Parity keeps the
  // concurrent write of batch t+1 away from the buffer being read.
  std::vector<std::array<ActivationPacket, 2>> slots(K);
  const std::size_t ticks = steps + K - 1;
  std::atomic<bool> abort{false};
  ErrorSlot err;
  std::barrier sync_point(static_cast<std::ptrdiff_t>(K));
  const auto t0 = Clock::now();

  auto worker = [&](std::size_t k) {
    StageStats& st = run.stages[k];
    LwbpModule& mod = net.module(k);
    for (std::size_t tick = 0; tick < ticks; ++tick) {
      if (!abort.load() && tick >= k && tick - k < steps) {
        const std::size_t t = tick - k;
        const auto busy0 = Clock::now();
        try {
          ActivationPacket in;
          if (k == 0) {
            auto [x, y] = stream();
            in.batch_id = t;
            in.activation = std::move(x);
            in.label = std::move(y);
          } else {
            in = std::move(slots[k][t % 2]);
          }
          LocalStep step = mod.local_update(in.activation, in.label, lr);
          run.metrics[t].loss[k] = step.loss;
          run.metrics[t].accuracy[k] = step.accuracy;
          if (k + 1 < K) {
            slots[k + 1][t % 2] = ActivationPacket{t, static_cast<int>(k + 1), std::move(step.output),
                                                   std::move(in.label)};
          }
          ++st.batches;
        } catch (...) {
          err.set(static_cast<int>(k), std::current_exception());
          abort.store(true);
        }
        st.busy_s += seconds_since(busy0);
      }
      const auto idle0 = Clock::now();
      sync_point.arrive_and_wait();
      st.idle_s += seconds_since(idle0);
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(K);
  for (std::size_t k = 0; k < K; ++k) threads.emplace_back(worker, k);
  for (auto& th : threads) th.join();
  run.wall_s = seconds_since(t0);
  err.rethrow();
  for (auto& s : run.stages) finish_staleness(s, 0.0);
  return run;
}

PipelineRun run_async(LwbpNetwork& net, const BatchStream& stream, std::size_t steps, double lr,
                      std::size_t queue_capacity) {
  const std::size_t K = net.size();
  if (K == 0) throw std::invalid_argument("run_async: empty network");
  if (queue_capacity == 0) throw std::invalid_argument("run_async: queue capacity must be >= 1");
  PipelineRun run = make_run(PipelineMode::Async, queue_capacity, K, steps);
  if (steps == 0) return run;

  // queues[k] feeds stage k (k >= 1).
  std::vector<std::unique_ptr<BoundedQueue<ActivationPacket>>> queues(K);
  for (std::size_t k = 1; k < K; ++k) {
    queues[k] = std::make_unique<BoundedQueue<ActivationPacket>>(queue_capacity);
  }
  ErrorSlot err;
  auto shutdown = [&] {
    for (auto& q : queues) {
      if (q) q->close();
    }
  };
  const auto t0 = Clock::now();

  auto worker = [&](std::size_t k) {
    StageStats& st = run.stages[k];
    LwbpModule& mod = net.module(k);
    double staleness_sum = 0.0;
    try {
      for (std::size_t t = 0; t < steps; ++t) {
        ActivationPacket in;
        if (k == 0) {
          auto [x, y] = stream();
          in.batch_id = t;
          in.activation = std::move(x);
          in.label = std::move(y);
        } else {
          const auto idle0 = Clock::now();
          auto got = queues[k]->pop();
          st.idle_s += seconds_since(idle0);
          if (!got) return;  // upstream failed and closed the queue
          in = std::move(got->first);
          const std::uint64_t stale = got->second - (in.batch_id + 1);
          st.max_staleness = std::max(st.max_staleness, stale);
          staleness_sum += static_cast<double>(stale);
        }
        const auto busy0 = Clock::now();
        LocalStep step = mod.local_update(in.activation, in.label, lr);
        st.busy_s += seconds_since(busy0);
        run.metrics[in.batch_id].loss[k] = step.loss;
        run.metrics[in.batch_id].accuracy[k] = step.accuracy;
        ++st.batches;
        if (k + 1 < K) {
          const auto idle0 = Clock::now();
          const bool ok = queues[k + 1]->push(ActivationPacket{
              in.batch_id, static_cast<int>(k + 1), std::move(step.output), std::move(in.label)});
          st.idle_s += seconds_since(idle0);
          if (!ok) return;
        }
      }
    } catch (...) {
      err.set(static_cast<int>(k), std::current_exception());
      shutdown();
    }
    finish_staleness(st, staleness_sum);
  };

  std::vector<std::thread> threads;
  threads.reserve(K);
  for (std::size_t k = 0; k < K; ++k) threads.emplace_back(worker, k);
  for (auto& th : threads) th.join();
  run.wall_s = seconds_since(t0);
  err.rethrow();
  return run;
}

PipelineRun run_pipeline(LwbpNetwork& net, const BatchStream& stream, std::size_t steps,
                         const PipelineConfig& cfg) {
  if (cfg.mode == PipelineMode::Sync) return run_sync(net, stream, steps, cfg.lr);
  return run_async(net, stream, steps, cfg.lr, cfg.queue_capacity);
}

ThroughputReport throughput_report(const PipelineRun& run) {
  ThroughputReport rep;
  rep.stages = run.stages;
  rep.wall_s = run.wall_s;
  const double batches = run.metrics.empty() ? 0.0 : static_cast<double>(run.metrics.size());
  rep.batches_per_s = run.wall_s > 0.0 ? batches / run.wall_s : 0.0;
  for (const auto& s : run.stages) {
    const double total = s.busy_s + s.idle_s;
    rep.utilization.push_back(total > 0.0 ? s.busy_s / total : 0.0);
  }
  return rep;
}

std::string throughput_csv(const ThroughputReport& report) {
  std::ostringstream os;
  os << "stage,batches,busy_s,idle_s,max_staleness\n";
  char buf[160];
  for (std::size_t k = 0; k < report.stages.size(); ++k) {
    const auto& s = report.stages[k];
    std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f,%.6f,%llu\n", k,
                  static_cast<unsigned long long>(s.batches), s.busy_s, s.idle_s,
                  static_cast<unsigned long long>(s.max_staleness));
    os << buf;
  }
  return os.str();
}

}  // namespace cortexkit
