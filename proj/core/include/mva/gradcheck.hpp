#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mva/autodiff.hpp"
#include "mva/rng.hpp"

namespace mva {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_location;
    int checked = 0;
};

// Central finite-difference check of reverse-mode gradients.
// `loss` must rebuild the graph from the current parameter values on each
// call. For large tensors, `samples_per_tensor` coordinates are probed
// (all coordinates when the tensor is smaller).
GradCheckReport gradient_check(const std::function<ad::Var()>& loss,
                               const std::vector<ad::Var>& params,
                               int samples_per_tensor, double h, Rng& rng);

double rel_error(double a, double b);

}  // namespace mva
