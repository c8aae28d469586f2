#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cortexkit/lwbp.hpp"

namespace cortexkit {

enum class PipelineMode { Sync, Async };

PipelineMode parse_pipeline_mode(const std::string& name);
std::string to_string(PipelineMode mode);

struct PipelineConfig {
  PipelineMode mode = PipelineMode::Sync;
  std::size_t queue_capacity = 1;  // ignored in Sync mode
  double lr = 1e-4;
};

/// Immutable unit handed from one stage to the next.
struct ActivationPacket {
  std::uint64_t batch_id = 0;
  int stage = 0;  // index of the stage that consumes it
  Matrix activation;
  Matrix label;
};

/// Produces the next (batch, labels) pair; called from stage 0 only, in order.
using BatchStream = std::function<std::pair<Matrix, Matrix>()>;

class PipelineError : public std::runtime_error {
 public:
  PipelineError(int stage, const std::string& what)
      : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Blocking bounded FIFO. push() waits while full; pop() waits while empty
/// and returns nullopt once the queue is closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("BoundedQueue: capacity must be >= 1");
  }

  /// Returns false if the queue was closed before the item could be queued.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    ++pushed_;
    not_empty_.notify_one();
    return true;
  }

  /// Item plus the number of items ever pushed, observed at pop time.
  std::optional<std::pair<T, std::uint64_t>> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return std::make_pair(std::move(item), pushed_);
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<T> items_;
  std::uint64_t pushed_ = 0;
  bool closed_ = false;
};

struct StageStats {
  std::uint64_t batches = 0;
  double busy_s = 0.0;
  double idle_s = 0.0;
  std::uint64_t max_staleness = 0;
  double mean_staleness = 0.0;
};

struct PipelineRun {
  PipelineMode mode = PipelineMode::Sync;
  std::size_t queue_capacity = 1;
  std::vector<ModuleMetrics> metrics;  // one entry per batch, in batch order
  std::vector<StageStats> stages;
  double wall_s = 0.0;
};

/// Lockstep schedule: at tick t, stage k trains on batch t - k, then all
/// stages meet at a barrier. Final parameters equal the sequential trainer's.
PipelineRun run_sync(LwbpNetwork& net, const BatchStream& stream, std::size_t steps, double lr);

/// Free-running stages joined by bounded FIFO queues of `queue_capacity`.
/// Staleness of a consumed packet counts how many newer packets the upstream
/// stage had already pushed when it was taken off the queue.
PipelineRun run_async(LwbpNetwork& net, const BatchStream& stream, std::size_t steps, double lr,
                      std::size_t queue_capacity);

PipelineRun run_pipeline(LwbpNetwork& net, const BatchStream& stream, std::size_t steps,
                         const PipelineConfig& cfg);

struct ThroughputReport {
  std::vector<StageStats> stages;
  double wall_s = 0.0;
  double batches_per_s = 0.0;
  std::vector<double> utilization;  // busy / (busy + idle) per stage
};

ThroughputReport throughput_report(const PipelineRun& run);

/// CSV with header `stage,batches,busy_s,idle_s,max_staleness`.
std::string throughput_csv(const ThroughputReport& report);

}  // namespace cortexkit
