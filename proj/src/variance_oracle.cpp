#include "cdinfer/variance_oracle.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

#include "cdinfer/errors.hpp"
#include "cdinfer/estimators.hpp"

namespace cdinfer {

namespace {

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// 1/(n-1) covariance; 0 for n < 2.
double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = mean_of(a), mb = mean_of(b);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(n - 1);
}

} // namespace

VarianceComponents variance_components(const FinitePopulation& pop, const DesignSpec& design) {
  const auto scaled = scale_outcomes(pop);
  const std::size_t C = pop.num_clusters();
  VarianceComponents vc;
  std::vector<double> tau_c(C);
  for (std::size_t c = 0; c < C; ++c) tau_c[c] = scaled.total[1][c] - scaled.total[0][c];
  for (int d = 0; d < 2; ++d) vc.sigma2[d] = sample_cov(scaled.total[d], scaled.total[d]);
  vc.sigma2_tau = sample_cov(tau_c, tau_c);
  vc.sigma_10 = sample_cov(scaled.total[1], scaled.total[0]);

  for (int d = 0; d < 2; ++d) {
    vc.s2[d].resize(C);
    for (std::size_t c = 0; c < C; ++c) vc.s2[d][c] = sample_cov(scaled.unit[d][c], scaled.unit[d][c]);
  }
  vc.fpc.resize(C);
  for (std::size_t c = 0; c < C; ++c) vc.fpc[c] = fpc_factor(design.clusters.at(c).N, design.clusters.at(c).n);
  return vc;
}

namespace {

struct ArmTerms {
  double between[2] = {0.0, 0.0};
  double within[2] = {0.0, 0.0};
  double heterogeneity = 0.0;
};

ArmTerms arm_terms(const FinitePopulation& pop, const DesignSpec& design) {
  const auto pr = probabilities(design);
  const auto vc = variance_components(pop, design);
  const double C = static_cast<double>(design.C);
  ArmTerms t;
  for (Arm a : {Arm::control, Arm::treated}) {
    const int d = arm_index(a);
    const double e = pr.arm_probability(a);
    t.between[d] = vc.sigma2[d] / e / C;
    double w = 0.0;
    for (std::size_t c = 0; c < design.C; ++c) w += vc.fpc[c] * vc.s2[d][c];
    t.within[d] = w / e / (C * C);
  }
  t.heterogeneity = vc.sigma2_tau / C;
  return t;
}

} // namespace

double exact_var_infeasible(const FinitePopulation& pop, const DesignSpec& design) {
  const auto t = arm_terms(pop, design);
  return t.between[1] + t.between[0] - t.heterogeneity;
}

double exact_var_feasible(const FinitePopulation& pop, const DesignSpec& design) {
  const auto t = arm_terms(pop, design);
  return t.between[1] + t.between[0] - t.heterogeneity + t.within[1] + t.within[0];
}

double conservative_var(const FinitePopulation& pop, const DesignSpec& design) {
  const auto t = arm_terms(pop, design);
  return t.between[1] + t.between[0] + t.within[1] + t.within[0];
}

double plugin_arm_expectation(const FinitePopulation& pop, const DesignSpec& design, Arm arm) {
  const auto pr = probabilities(design);
  const auto dl = delta(design);
  const auto scaled = scale_outcomes(pop);
  const auto vc = variance_components(pop, design);
  const int d = arm_index(arm);
  const double e = pr.arm_probability(arm);
  double sum = 0.0, sum_sq = 0.0, within = 0.0;
  for (std::size_t c = 0; c < design.C; ++c) {
    const double y = scaled.total[d][c];
    sum += y;
    sum_sq += y * y;
    within += vc.fpc[c] * vc.s2[d][c];
  }
  const double C = static_cast<double>(design.C);
  return (dl.cluster_quadratic(arm, sum, sum_sq) / (e * e) + within / e) / (C * C);
}

double sorted_pairing_sum(std::vector<double> a, std::vector<double> b, bool reversed) {
  std::sort(a.begin(), a.end());
  if (reversed)
    std::sort(b.begin(), b.end(), std::greater<>());
  else
    std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

PluginDecomposition infeasible_plugin_decomposition(const FinitePopulation& pop, const DesignSpec& design,
                                                    const BothArmDraw& draw) {
  const auto pr = probabilities(design);
  const auto dl = delta(design);
  const double nbar = design.nbar();
  const std::size_t Cn = design.C;
  const double C = static_cast<double>(Cn);
  if (pop.num_clusters() != Cn || draw.sampled[0].size() != Cn || draw.sampled[1].size() != Cn)
    throw std::invalid_argument("plug-in decomposition needs both-arm draws for every cluster");

  std::vector<double> yhat[2];
  double v[2] = {0.0, 0.0};
  for (Arm a : {Arm::control, Arm::treated}) {
    const int d = arm_index(a);
    yhat[d].resize(Cn);
    double sum = 0.0, sum_sq = 0.0, unit_part = 0.0;
    for (std::size_t c = 0; c < Cn; ++c) {
      const auto& cd = design.clusters[c];
      const auto& ys = draw.sampled[d].at(c);
      yhat[d][c] = ht_cluster_total(ys, cd.n, cd.N, nbar);
      sum += yhat[d][c];
      sum_sq += yhat[d][c] * yhat[d][c];
      const auto w = unit_variance_weights(cd.N, cd.n);
      double us = 0.0, us2 = 0.0;
      for (double y : ys) {
        us += y / nbar;
        us2 += (y / nbar) * (y / nbar);
      }
      unit_part += w.apply(us, us2);
    }
    const double e = pr.arm_probability(a);
    v[d] = (dl.cluster_quadratic(a, sum, sum_sq) / (e * e) + unit_part) / (C * C);
  }

  PluginDecomposition out;
  out.v1 = v[1];
  out.v0 = v[0];
  out.cross_cov = sample_cov(yhat[1], yhat[0]);
  out.total = out.v1 + out.v0 + 2.0 / C * out.cross_cov;
  const double m1 = mean_of(yhat[1]), m0 = mean_of(yhat[0]);
  out.sigma_h = sorted_pairing_sum(yhat[1], yhat[0], false) / C - m1 * m0;
  out.sigma_l = sorted_pairing_sum(yhat[1], yhat[0], true) / C - m1 * m0;
  out.var_h = out.v1 + out.v0 + 2.0 / C * out.sigma_h;
  out.var_l = out.v1 + out.v0 + 2.0 / C * out.sigma_l;
  return out;
}

FhBounds true_total_fh_bounds(const FinitePopulation& pop) {
  const auto scaled = scale_outcomes(pop);
  const std::size_t Cn = scaled.num_clusters();
  const double C = static_cast<double>(Cn);
  const double m1 = scaled.arm_mean[1], m0 = scaled.arm_mean[0];
  // Centre before pairing; the pairing order is unchanged by a shift.
  std::vector<double> a(Cn), b(Cn);
  for (std::size_t c = 0; c < Cn; ++c) {
    a[c] = scaled.total[1][c] - m1;
    b[c] = scaled.total[0][c] - m0;
  }
  FhBounds fh;
  fh.sigma_h = sorted_pairing_sum(a, b, false) / (C - 1.0);
  fh.sigma_l = sorted_pairing_sum(a, b, true) / (C - 1.0);
  return fh;
}

} // namespace cdinfer
