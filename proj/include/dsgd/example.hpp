#pragma once

#include "dsgd/param_core.hpp"

namespace dsgd {

/// One labelled instance (y_t, z_t). For the centered quadratic loss the
/// feature vector holds the center c_t and the label is ignored.
struct SparseExample {
  double label = 1.0;
  SparseVector features;

  friend bool operator==(const SparseExample&, const SparseExample&) = default;
};

}  // namespace dsgd
