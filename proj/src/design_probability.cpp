#include "cdinfer/design_probability.hpp"

#include "cdinfer/errors.hpp"

namespace cdinfer {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// a(a-1) / (b(b-1)) without forming huge intermediates.
double pair_ratio(std::size_t a, std::size_t b) {
  if (a < 2 || b < 2) return 0.0;
  return (static_cast<double>(a) / static_cast<double>(b)) *
         (static_cast<double>(a - 1) / static_cast<double>(b - 1));
}

} // namespace

DesignProbabilities probabilities(const DesignSpec& design) {
  if (design.S1 == 0 || design.S1 >= design.S)
    throw DegenerateDesign("q = S1/S must lie in (0,1); got S1 = " + std::to_string(design.S1) +
                           ", S = " + std::to_string(design.S));
  DesignProbabilities pr;
  pr.p = ratio(design.S, design.C);
  pr.q = ratio(design.S1, design.S);
  pr.p_tilde = design.C > 1 ? ratio(design.S - 1, design.C - 1) : 0.0;
  pr.q_tilde = design.S > 1 ? ratio(design.S1 - 1, design.S - 1) : 0.0;
  pr.pi.reserve(design.clusters.size());
  pr.pi_tilde.reserve(design.clusters.size());
  for (const auto& cd : design.clusters) {
    pr.pi.push_back(ratio(cd.n, cd.N));
    pr.pi_tilde.push_back(cd.N > 1 ? ratio(cd.n - 1, cd.N - 1) : 0.0);
  }
  return pr;
}

double fpc_factor(std::size_t N, std::size_t n) {
  if (n == 0) return 0.0;
  return static_cast<double>(N) * static_cast<double>(N - n) / static_cast<double>(n);
}

JointInclusion joint_inclusion(const DesignSpec& design) {
  const std::size_t C = design.C, S = design.S, S1 = design.S1, S0 = design.S0();
  JointInclusion j;
  j.both_sampled = pair_ratio(S, C);
  j.treated_treated = pair_ratio(S1, C);
  j.control_control = pair_ratio(S0, C);
  j.treated_control = C > 1 ? (static_cast<double>(S1) / static_cast<double>(C)) *
                                  (static_cast<double>(S0) / static_cast<double>(C - 1))
                            : 0.0;
  j.treated = ratio(S1, C);
  j.control = ratio(S0, C);
  for (const auto& cd : design.clusters) {
    j.unit_single.push_back(ratio(cd.n, cd.N));
    j.unit_pair.push_back(pair_ratio(cd.n, cd.N));
  }
  return j;
}

DeltaCovariances delta(const DesignSpec& design) {
  const auto j = joint_inclusion(design);
  DeltaCovariances dl;
  for (Arm a : {Arm::control, Arm::treated}) {
    const int d = arm_index(a);
    const double e = j.arm_single(a);
    dl.diag[d] = e * (1.0 - e);
    dl.off[d] = j.same_arm_pair(a) - e * e;
  }
  const std::size_t C = design.clusters.size();
  dl.unit_diag.resize(C);
  dl.unit_off.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double pi = j.unit_single[c];
    dl.unit_diag[c] = pi * (1.0 - pi);
    dl.unit_off[c] = j.unit_pair[c] - pi * pi;
  }
  return dl;
}

UnitVarianceWeights unit_variance_weights(std::size_t N, std::size_t n) {
  if (n == N) return {};
  if (n < 2)
    throw InsufficientUnits("unbiased within-cluster variance needs n_c >= 2 when n_c < N_c (got n_c = " +
                            std::to_string(n) + ", N_c = " + std::to_string(N) + ")");
  const double pi = ratio(n, N);
  const double pi_t = ratio(n - 1, N - 1);
  UnitVarianceWeights w;
  w.diag = (1.0 - pi) / (pi * pi);
  w.off = (pi_t - pi) / (pi_t * pi * pi);
  return w;
}

} // namespace cdinfer
