#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cortexkit/nncore.hpp"

namespace cortexkit {

enum class GradFault { None, BioAlphaSignFlip };

GradFault parse_grad_fault(const std::string& name);

struct GradcheckOptions {
  double step = 1e-3;         // largest stencil spacing; 10x and 100x smaller are also tried
  double tolerance = 1e-6;    // max relative error allowed
  double denom_floor = 1e-4;  // |a - n| / max(|a|, |n|, floor)
  std::uint64_t seed = 7;
  GradFault fault = GradFault::None;
};

struct GradcheckResult {
  std::string suite;
  double max_rel_err = 0.0;
  std::size_t checked = 0;  // number of scalar coordinates compared
  bool passed = false;
};

double relative_error(double analytic, double numeric, double floor);

/// Fourth-order central difference of f around the current value of `x`.
/// `x` is restored before returning.
double central_difference(const std::function<double()>& f, double& x, double h);

/// Max over entries of `value` of the relative error between `analytic` and
/// the numeric derivative of `loss`, taking the best of three step sizes.
double compare_gradient(Matrix& value, const Matrix& analytic, const std::function<double()>& loss,
                        const GradcheckOptions& opt, std::size_t* checked = nullptr);

/// Every suite: dense layers (tanh, sigmoid+shortcut, leaky relu), both
/// losses, a full LWBP module, end-to-end BP, the four bio deltas (first and
/// shortcut modules), the engram total loss and the joint image model.
std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& opt = {});

}  // namespace cortexkit
