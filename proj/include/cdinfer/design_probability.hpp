#pragma once

#include <cstddef>
#include <vector>

#include "cdinfer/population.hpp"

namespace cdinfer {

enum class Arm { control = 0, treated = 1 };

inline int arm_index(Arm a) noexcept { return a == Arm::treated ? 1 : 0; }

// First- and second-stage inclusion/assignment probabilities of a
// simple-random-sampling-without-replacement two-stage design.
struct DesignProbabilities {
  double p = 0.0;       // S / C
  double q = 0.0;       // S1 / S
  double p_tilde = 0.0; // (S-1) / (C-1)
  double q_tilde = 0.0; // (S1-1) / (S-1)
  std::vector<double> pi;       // n_c / N_c
  std::vector<double> pi_tilde; // (n_c-1) / (N_c-1), 0 when N_c = 1

  // E[R_c D_c] or E[R_c (1-D_c)].
  double arm_probability(Arm a) const noexcept { return a == Arm::treated ? p * q : p * (1.0 - q); }
};

// Throws DegenerateDesign when S1 is 0 or S.
DesignProbabilities probabilities(const DesignSpec& design);

// Second-stage variance factor (1-pi)(1-pi~) / (pi (pi - pi~)) of a cluster,
// evaluated in the equivalent form N (N - n) / n so that it is 0 (not 0/0)
// for fully enumerated clusters.
double fpc_factor(std::size_t N, std::size_t n);

// Pairwise design expectations. Cluster-pair values are for c != c'.
struct JointInclusion {
  double both_sampled = 0.0;     // S(S-1) / (C(C-1))
  double treated_treated = 0.0;  // S1(S1-1) / (C(C-1))
  double control_control = 0.0;  // S0(S0-1) / (C(C-1))
  double treated_control = 0.0;  // S1 S0 / (C(C-1))
  double treated = 0.0;          // pq
  double control = 0.0;          // p(1-q)
  std::vector<double> unit_single; // pi_c
  std::vector<double> unit_pair;   // n_c(n_c-1) / (N_c(N_c-1)), 0 when N_c = 1

  double same_arm_pair(Arm a) const noexcept {
    return a == Arm::treated ? treated_treated : control_control;
  }
  double arm_single(Arm a) const noexcept { return a == Arm::treated ? treated : control; }
};

JointInclusion joint_inclusion(const DesignSpec& design);

// Design covariances of the arm indicators and of the unit sampling
// indicators. By symmetry every cluster pair shares one off-diagonal value,
// so each arm is two scalars; double sums collapse through
//   sum_c sum_c' D_cc' x_c x_c' = off * ((sum x)^2 - sum x^2) + diag * sum x^2.
struct DeltaCovariances {
  double diag[2] = {0.0, 0.0};
  double off[2] = {0.0, 0.0};
  std::vector<double> unit_diag; // pi_c (1 - pi_c)
  std::vector<double> unit_off;  // E[R_i R_j] - pi_c^2

  double cluster_quadratic(Arm a, double sum, double sum_sq) const noexcept {
    const int d = arm_index(a);
    return off[d] * (sum * sum - sum_sq) + diag[d] * sum_sq;
  }
  double unit_quadratic(std::size_t c, double sum, double sum_sq) const noexcept {
    return unit_off[c] * (sum * sum - sum_sq) + unit_diag[c] * sum_sq;
  }
};

DeltaCovariances delta(const DesignSpec& design);

// Weights of the unbiased estimator of Var(within-cluster HT total) from the
// sampled units: sum_i diag y_i^2 + sum_{i != j} off y_i y_j, i.e. the unit
// pair terms Delta_ij / (E[R_i R_j] pi_c^2). Both are 0 for a fully
// enumerated cluster. Throws InsufficientUnits when n_c = 1 < N_c (no sampled
// pairs, so the off-diagonal weight is undefined).
struct UnitVarianceWeights {
  double diag = 0.0;
  double off = 0.0;

  double apply(double sum, double sum_sq) const noexcept { return off * (sum * sum - sum_sq) + diag * sum_sq; }
};

UnitVarianceWeights unit_variance_weights(std::size_t N, std::size_t n);

} // namespace cdinfer
