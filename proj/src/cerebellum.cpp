#include "cortexkit/cerebellum.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cortexkit {

GranulePurkinje::GranulePurkinje(int n_granule, double total)
    : enabled_(static_cast<std::size_t>(std::max(n_granule, 0)), 1), total_(total) {
  if (n_granule < 1) throw std::invalid_argument("GranulePurkinje: need at least one granule cell");
  if (!(total > 0.0)) throw std::invalid_argument("GranulePurkinje: total weight must be positive");
}

int GranulePurkinje::enabled_count() const {
  return static_cast<int>(std::count(enabled_.begin(), enabled_.end(), std::uint8_t{1}));
}

double effective_weight(const GranulePurkinje& gp) {
  // Multiply before dividing so k/n levels come out correctly rounded (7/10 == 0.7).
  return gp.total() * static_cast<double>(gp.enabled_count()) / static_cast<double>(gp.size());
}

AdjustmentPlan plan_adjustment(const GranulePurkinje& gp, double target) {
  if (!(target >= 0.0 && target <= gp.total())) {
    throw std::out_of_range("plan_adjustment: target " + std::to_string(target) + " outside [0, " +
                            std::to_string(gp.total()) + "]");
  }
  const int n = gp.size();
  // nearbyint honours the default round-to-nearest-even mode.
  const int level =
      std::clamp(static_cast<int>(std::nearbyint(target * n / gp.total())), 0, n);
  const int current = gp.enabled_count();

  AdjustmentPlan plan;
  plan.target_level = level;
  if (level < current) {
    for (int i = n - 1; i >= 0 && static_cast<int>(plan.disable.size()) < current - level; --i) {
      if (gp.enabled(i)) plan.disable.push_back(i);
    }
  } else if (level > current) {
    for (int i = 0; i < n && static_cast<int>(plan.enable.size()) < level - current; ++i) {
      if (!gp.enabled(i)) plan.enable.push_back(i);
    }
  }
  plan.achieved = gp.total() * static_cast<double>(level) / static_cast<double>(n);
  plan.residual = std::abs(plan.achieved - target);
  return plan;
}

void apply(GranulePurkinje& gp, const AdjustmentPlan& plan) {
  for (int i : plan.disable) gp.set_enabled(i, false);
  for (int i : plan.enable) gp.set_enabled(i, true);
}

}  // namespace cortexkit
