#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdinfer/design_probability.hpp"
#include "cdinfer/population.hpp"
#include "cdinfer/sampling.hpp"

namespace cdinfer {

// Scaled within-cluster Horvitz-Thompson total (1/nbar) (N_c/n_c) sum y.
// Throws EmptyCluster when ys is empty.
double ht_cluster_total(std::span<const double> ys, std::size_t n, std::size_t N, double nbar);

struct ClusterAggregate {
  std::size_t index = 0; // design position
  Arm arm = Arm::control;
  double total_hat = 0.0;           // scaled HT total
  std::vector<double> scaled_units; // sampled y / nbar
};

// Per sampled cluster scaled HT totals; the unit of all variance computations.
struct ClusterAggregates {
  double nbar = 0.0;
  std::vector<ClusterAggregate> clusters;

  // Totals of one arm, in design order.
  std::vector<double> totals(Arm a) const;
};

ClusterAggregates aggregate(const ObservedSample& sample, const DesignSpec& design);

// Cluster-level form (1/C) sum [R D Yhat/(pq) - R(1-D) Yhat/(p(1-q))].
double ht_ate(const ObservedSample& sample, const DesignSpec& design);
double ht_ate(const ClusterAggregates& agg, const DesignSpec& design, const DesignProbabilities& pr);

// Unit-level form (1/N) sum_c sum_i [R D R_i Y/(pq pi) - ...]; same value.
double ht_ate_unit_level(const ObservedSample& sample, const DesignSpec& design);

// HT estimator on the true scaled totals of the realized first stage; only the
// cluster indices and assignments of `first_stage` are used.
double infeasible_ate(const FinitePopulation& pop, const DesignSpec& design,
                      const ObservedSample& first_stage);

// Mean of treated sampled outcomes minus mean of control sampled outcomes.
// Throws NoArmData if an arm has no sampled units.
double diff_in_means(const ObservedSample& sample);

} // namespace cdinfer
