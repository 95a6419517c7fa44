#pragma once

#include <cstddef>
#include <vector>

#include "cdinfer/design_probability.hpp"
#include "cdinfer/population.hpp"
#include "cdinfer/sampling.hpp"

// Exact design variances and related quantities. Everything here needs both
// potential outcomes of every unit, so it is for simulation and verification.
// All dispersion measures use the 1/(C-1) and 1/(N_c-1) conventions.
namespace cdinfer {

struct VarianceComponents {
  double sigma2[2] = {0.0, 0.0}; // across-cluster variance of scaled totals, [d]
  double sigma2_tau = 0.0;       // across-cluster variance of cluster effects
  double sigma_10 = 0.0;         // across-cluster covariance of the two arms
  std::vector<double> s2[2];     // within-cluster variance of scaled outcomes, [d][c]
  std::vector<double> fpc;       // second-stage factor f_c, 0 when n_c = N_c
};

VarianceComponents variance_components(const FinitePopulation& pop, const DesignSpec& design);

// Variance of the HT estimator built on true cluster totals.
double exact_var_infeasible(const FinitePopulation& pop, const DesignSpec& design);
// Variance of the feasible two-stage HT estimator.
double exact_var_feasible(const FinitePopulation& pop, const DesignSpec& design);
// The feasible variance without the (negative) effect-heterogeneity term.
double conservative_var(const FinitePopulation& pop, const DesignSpec& design);

// Design expectation of the plug-in arm variance Vtilde_d (equivalently of the
// feasible arm estimator Vhat_d):
//   (1/C^2) [ sum_cc' Delta^d_cc' Y_c(d) Y_c'(d) / E_d^2 + sum_c f_c s2_c(d) / E_d ].
double plugin_arm_expectation(const FinitePopulation& pop, const DesignSpec& design, Arm arm);

struct PluginDecomposition {
  double v1 = 0.0;
  double v0 = 0.0;
  double cross_cov = 0.0; // 1/(C-1) covariance of the estimated totals
  double total = 0.0;     // v1 + v0 + (2/C) cross_cov
  // Sharp covariance bounds of the estimated-total marginals (quantile
  // couplings with mass 1/C per cluster) and the variance bounds they imply.
  double sigma_h = 0.0;
  double sigma_l = 0.0;
  double var_h = 0.0;
  double var_l = 0.0;
};

// Plug-in variance from independent second-stage draws of both arms for
// every cluster. Throws InsufficientUnits if some n_c = 1 < N_c.
PluginDecomposition infeasible_plugin_decomposition(const FinitePopulation& pop, const DesignSpec& design,
                                                    const BothArmDraw& draw);

struct FhBounds {
  double sigma_l = 0.0;
  double sigma_h = 0.0;
};

// Sharp bounds on the 1/(C-1) covariance of the true scaled cluster totals
// given only their two marginals: comonotone (ascending-ascending) and
// countermonotone (ascending-descending) pairings.
FhBounds true_total_fh_bounds(const FinitePopulation& pop);

// sum_k a_(k) b_(k) (or b_(m+1-k) when reversed) over sorted copies.
double sorted_pairing_sum(std::vector<double> a, std::vector<double> b, bool reversed);

} // namespace cdinfer
