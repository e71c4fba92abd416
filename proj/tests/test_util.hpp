#pragma once

#include "av/common.hpp"
#include "av/tensor.hpp"

namespace avtest {

inline av::Tensor random_tensor(av::Rng& rng, std::vector<size_t> shape, double lo = -1.0,
                                double hi = 1.0) {
  av::Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Uniform in [-1,1] but at least `margin` away from zero, for inputs that feed
// relu/maxpool directly: central differences are invalid across a kink.
inline av::Tensor random_tensor_off_kink(av::Rng& rng, std::vector<size_t> shape,
                                         double margin = 5e-3) {
  av::Tensor t(std::move(shape));
  for (size_t i = 0; i < t.size(); ++i) {
    double u = rng.uniform(margin, 1.0);
    t[i] = rng.uniform() < 0.5 ? -u : u;
  }
  return t;
}

}  // namespace avtest
