#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cortexkit/engram.hpp"

namespace cortexkit {

inline constexpr double kLtpThreshold = 0.95;

/// Binary synapses from engram cells onto one target ("cheese") neuron.
struct LtpSynapses {
  std::vector<std::uint8_t> weights;
  double threshold = kLtpThreshold;
  Point2 site{};
  std::string warning;  // non-empty when no engram cell crossed the threshold

  std::size_t potentiated() const;
};

/// w_i = 1 iff h_i(site) > threshold.
LtpSynapses form_ltp(const EngramAE& ae, Point2 site, double threshold = kLtpThreshold);

/// sum_i w_i h_i / sum_i w_i for each row of `activations`.
std::vector<double> recall_from_activations(const Matrix& activations, const LtpSynapses& syn);

double recall_degree(const EngramAE& ae, const LtpSynapses& syn, Point2 location);

/// n x n recall map over [0,1]^2, row index y, column index x.
Matrix memory_heatmap(const EngramAE& ae, const LtpSynapses& syn, int grid_n = 101);

struct SharedEngram {
  std::vector<int> only1;
  std::vector<int> only2;
  std::vector<int> both;
};

/// Indices of engram cells with h > threshold at `site`.
std::vector<int> engram_set(const EngramAE& ae, Point2 site, double threshold = kLtpThreshold);

SharedEngram shared_engram(const EngramAE& ae, Point2 site1, Point2 site2,
                           double threshold = kLtpThreshold);

}  // namespace cortexkit
