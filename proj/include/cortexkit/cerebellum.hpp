#pragma once

#include <cstdint>
#include <vector>

namespace cortexkit {

/// n granule cells share a fixed total weight onto one Purkinje cell; each
/// synapse is either enabled (LTP) or silenced (LTD).
class GranulePurkinje {
 public:
  explicit GranulePurkinje(int n_granule, double total = 1.0);

  int size() const { return static_cast<int>(enabled_.size()); }
  double total() const { return total_; }
  double synapse_weight() const { return total_ / static_cast<double>(size()); }
  int enabled_count() const;
  bool enabled(int i) const { return enabled_.at(static_cast<std::size_t>(i)) != 0; }
  void set_enabled(int i, bool on) { enabled_.at(static_cast<std::size_t>(i)) = on ? 1 : 0; }

 private:
  std::vector<std::uint8_t> enabled_;
  double total_;
};

/// total * enabled / n.
double effective_weight(const GranulePurkinje& gp);

struct AdjustmentPlan {
  std::vector<int> enable;   // LTP
  std::vector<int> disable;  // LTD
  int target_level = 0;      // enabled count after the plan
  double achieved = 0.0;
  double residual = 0.0;     // |achieved - target|

  std::size_t size() const { return enable.size() + disable.size(); }
};

/// Minimum toggles reaching the quantization level nearest `target`
/// (round-half-even on the level index). LTD silences the highest-index
/// enabled synapses first; LTP restores the lowest-index silenced ones.
AdjustmentPlan plan_adjustment(const GranulePurkinje& gp, double target);

void apply(GranulePurkinje& gp, const AdjustmentPlan& plan);

}  // namespace cortexkit
