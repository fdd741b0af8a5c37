#pragma once

#include <functional>

#include "scvae/tensor.hpp"

namespace scvae {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_skipped = 0;  // both magnitudes below 1e-12
};

// Compares the analytic gradient of f at `point` against central finite
// differences. f must rebuild its graph from the given leaf on every call
// and be deterministic at the probe point (freeze any random draws).
// Relative error per coordinate: |analytic - central| / (|analytic| + |central| + eps).
GradCheckResult finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& point, double step = 1e-5,
                                  double eps = 1e-12);

}  // namespace scvae
