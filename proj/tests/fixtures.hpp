#pragma once

// Shared synthetic fixtures for tests.

#include "emf/classifiers.hpp"
#include "emf/rng.hpp"

#include <vector>

namespace fixtures {

// Isotropic unit-variance Gaussian blobs, one per class, means spaced
// `separation` apart along the first axis.
inline emf::classify::Dataset blobs(emf::Rng& rng, int per_class, int n_classes,
                                    int dims, double separation) {
  emf::classify::Dataset data;
  data.n_classes = n_classes;
  data.X.resize(per_class * n_classes, dims);
  data.y.resize(static_cast<std::size_t>(per_class) * n_classes);
  int row = 0;
  for (int c = 0; c < n_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      for (int d = 0; d < dims; ++d) {
        data.X(row, d) = (d == 0 ? separation * c : 0.0) + rng.normal();
      }
      data.y[static_cast<std::size_t>(row)] = c;
      ++row;
    }
  }
  return data;
}

}  // namespace fixtures
