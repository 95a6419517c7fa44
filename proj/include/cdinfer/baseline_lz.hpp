#pragma once

#include <cstddef>
#include <string>

#include "cdinfer/sampling.hpp"

namespace cdinfer {

enum class LzVariant { cr0, cr1 };

std::string to_string(LzVariant v);
// Accepts "cr0" or "cr1"; throws std::invalid_argument otherwise.
LzVariant parse_lz_variant(const std::string& s);

struct LzReport {
  double estimate = 0.0; // OLS coefficient on D
  double se = 0.0;
  std::size_t clusters = 0; // G
  std::size_t units = 0;    // n
  double factor = 1.0;      // small-sample factor applied to the sandwich
  LzVariant variant = LzVariant::cr1;
};

// Cluster-robust sandwich SE of the treatment coefficient in the unit-level
// OLS of y on {1, D}, clustering scores by sampled cluster. CR1 scales the
// sandwich by (G/(G-1)) ((n-1)/(n-2)). Unweighted.
// Throws InsufficientClusters unless both arms have at least two clusters.
LzReport lz_se(const ObservedSample& sample, LzVariant variant = LzVariant::cr1);

} // namespace cdinfer
