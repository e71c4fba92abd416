#pragma once

#include <functional>
#include <vector>

#include "av/graph.hpp"

namespace av {

// Builds a scalar from grad-enabled leaves created for `points`, in order.
using ScalarBuilder = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = false;
  size_t worst_leaf = 0;
  size_t worst_coord = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  // Smallest relu/maxpool margin seen across all evaluations. Central
  // differences are invalid within ~h of a kink; callers doing randomized
  // sweeps should redraw the point when this is below their safety margin.
  double kink_margin = 1e300;
};

// Central-difference check of backward() at `points`, coordinate by
// coordinate. Relative error uses max(|analytic|, |numeric|, 1e-3) as the
// denominator so near-zero gradients are compared absolutely. Non-finite
// objective values throw.
GradCheckReport finite_difference_check(const std::vector<Tensor>& points,
                                        const ScalarBuilder& f, double h, double tol);

}  // namespace av
