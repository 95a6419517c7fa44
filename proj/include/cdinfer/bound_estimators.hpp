#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdinfer/design_probability.hpp"
#include "cdinfer/estimators.hpp"
#include "cdinfer/sampling.hpp"

namespace cdinfer {

// Design-weighted empirical CDF of one arm's estimated cluster totals. Each
// observed cluster carries weight 1/(C p q_d) = 1/S_d, so the total mass is 1.
class WeightedEcdf {
public:
  WeightedEcdf(Arm arm, std::vector<double> values, double weight);

  Arm arm() const noexcept { return arm_; }
  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted() const noexcept { return sorted_; }
  double weight() const noexcept { return weight_; }

  // Mass at or below y.
  double operator()(double y) const;
  // Left-continuous inverse inf{y : G(y) >= u}; u <= 0 gives the minimum.
  double quantile(double u) const;
  // Order statistic ceil(S_d * k / m) (1-based), evaluated in exact integer
  // arithmetic for the rational level k/m.
  double quantile_at(std::uint64_t k, std::uint64_t m) const;

private:
  Arm arm_;
  std::vector<double> sorted_;
  double weight_;
};

// Ties are broken by cluster id, so the stored order is canonical.
WeightedEcdf weighted_ecdf(const ClusterAggregates& agg, const DesignSpec& design, Arm arm);
WeightedEcdf weighted_ecdf(const ObservedSample& sample, const DesignSpec& design, Arm arm);

// Union of {k/S1} and {k/S0} on [0,1]. Breakpoints are stored as integers
// over the common denominator lcm(S1, S0), so coinciding fractions merge
// exactly.
struct QuantileGrid {
  std::uint64_t denominator = 1;
  std::vector<std::uint64_t> numerators; // b_0 = 0 < b_1 < ... < b_B = 1
  std::vector<double> widths;            // b_h - b_{h-1}, h = 1..B
  std::vector<std::size_t> rank1;        // ceil(S1 b_h), 1-based
  std::vector<std::size_t> rank0;        // ceil(S0 b_h), 1-based

  std::size_t segments() const noexcept { return widths.size(); }
};

QuantileGrid quantile_grid(std::size_t S1, std::size_t S0);

struct CovarianceBounds {
  double sigma_l = 0.0;
  double sigma_h = 0.0;
};

// Sample analogues of the sharp covariance bounds: stepwise quantile
// couplings over the grid minus the product of the HT arm means.
CovarianceBounds sigma_hat_bounds(const ClusterAggregates& agg, const DesignSpec& design);
CovarianceBounds sigma_hat_bounds(const ObservedSample& sample, const DesignSpec& design);

// HT estimator of the plug-in arm variance. Throws InsufficientArm when S_d < 2
// and InsufficientUnits when a sampled arm-d cluster has n_c = 1 < N_c.
double vhat_arm(const ClusterAggregates& agg, const DesignSpec& design, Arm arm);
double vhat_arm(const ObservedSample& sample, const DesignSpec& design, Arm arm);

struct BoundReport {
  double v1_hat = 0.0;
  double v0_hat = 0.0;
  double sigma_h = 0.0;
  double sigma_l = 0.0;
  double var_h = 0.0;
  double var_l = 0.0;
  double var_consv = 0.0;
  double se_h = 0.0; // sqrt(max(var_h, 0))
  bool clamped = false;
};

BoundReport variance_interval(const ClusterAggregates& agg, const DesignSpec& design);
BoundReport variance_interval(const ObservedSample& sample, const DesignSpec& design);

// Unbiased estimator of the conservative variance. Needs S1, S0 >= 2.
double conservative_estimate(const ClusterAggregates& agg, const DesignSpec& design);
double conservative_estimate(const ObservedSample& sample, const DesignSpec& design);

} // namespace cdinfer
