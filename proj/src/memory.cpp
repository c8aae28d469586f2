#include "cortexkit/memory.hpp"

#include <algorithm>

namespace cortexkit {

namespace {

Matrix encode_point(const EngramAE& ae, Point2 p) {
  if (ae.config().input_dim != 2) throw DimensionError("memory: needs a 2-D location model");
  Matrix x(1, 2);
  x << p.x, p.y;
  return ae.encode(x);
}

}  // namespace

std::size_t LtpSynapses::potentiated() const {
  return static_cast<std::size_t>(std::count(weights.begin(), weights.end(), std::uint8_t{1}));
}

LtpSynapses form_ltp(const EngramAE& ae, Point2 site, double threshold) {
  const Matrix h = encode_point(ae, site);
  LtpSynapses syn;
  syn.threshold = threshold;
  syn.site = site;
  syn.weights.resize(static_cast<std::size_t>(h.cols()));
  for (Eigen::Index i = 0; i < h.cols(); ++i) {
    syn.weights[static_cast<std::size_t>(i)] = h(0, i) > threshold ? 1 : 0;
  }
  if (syn.potentiated() == 0) {
    syn.warning = "no engram cell exceeds " + std::to_string(threshold) +
                  " at the site; the model looks untrained";
  }
  return syn;
}

std::vector<double> recall_from_activations(const Matrix& activations, const LtpSynapses& syn) {
  require_dims(static_cast<std::size_t>(activations.cols()) == syn.weights.size(),
               "recall: activation width does not match synapse count");
  const std::size_t count = syn.potentiated();
  if (count == 0) throw std::domain_error("recall: no potentiated synapses");
  RowVector w(activations.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = syn.weights[static_cast<std::size_t>(i)];
  const Vector m = activations * w.transpose() / static_cast<double>(count);
  return {m.data(), m.data() + m.size()};
}

double recall_degree(const EngramAE& ae, const LtpSynapses& syn, Point2 location) {
  return recall_from_activations(encode_point(ae, location), syn).front();
}

Matrix memory_heatmap(const EngramAE& ae, const LtpSynapses& syn, int grid_n) {
  const Matrix response = grid_response(ae, grid_n);
  const auto m = recall_from_activations(response, syn);
  Matrix map(grid_n, grid_n);
  for (std::size_t r = 0; r < m.size(); ++r) map.data()[r] = m[r];
  return map;
}

std::vector<int> engram_set(const EngramAE& ae, Point2 site, double threshold) {
  const Matrix h = encode_point(ae, site);
  std::vector<int> out;
  for (Eigen::Index i = 0; i < h.cols(); ++i) {
    if (h(0, i) > threshold) out.push_back(static_cast<int>(i));
  }
  return out;
}

SharedEngram shared_engram(const EngramAE& ae, Point2 site1, Point2 site2, double threshold) {
  const auto a = engram_set(ae, site1, threshold);
  const auto b = engram_set(ae, site2, threshold);
  SharedEngram s;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(s.only1));
  std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(s.only2));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(s.both));
  return s;
}

}  // namespace cortexkit
