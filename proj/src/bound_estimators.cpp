#include "cdinfer/bound_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cdinfer/errors.hpp"

namespace cdinfer {

WeightedEcdf::WeightedEcdf(Arm arm, std::vector<double> values, double weight)
    : arm_(arm), sorted_(std::move(values)), weight_(weight) {
  std::stable_sort(sorted_.begin(), sorted_.end());
}

double WeightedEcdf::operator()(double y) const {
  const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), y) - sorted_.begin();
  // k/S_d rather than k * weight: the mass at the maximum is exactly 1.
  return static_cast<double>(k) / static_cast<double>(sorted_.size());
}

double WeightedEcdf::quantile(double u) const {
  if (sorted_.empty()) throw std::logic_error("quantile of an empty ECDF");
  const std::size_t S = sorted_.size();
  if (u <= 0.0) return sorted_.front();
  if (u >= 1.0) return sorted_.back();
  const double Sd = static_cast<double>(S);
  // Smallest k with k/S >= u; repair the floating-point ceiling both ways.
  auto k = static_cast<std::size_t>(std::ceil(u * Sd));
  k = std::clamp<std::size_t>(k, 1, S);
  while (k > 1 && static_cast<double>(k - 1) / Sd >= u) --k;
  while (k < S && static_cast<double>(k) / Sd < u) ++k;
  return sorted_[k - 1];
}

double WeightedEcdf::quantile_at(std::uint64_t k, std::uint64_t m) const {
  if (sorted_.empty()) throw std::logic_error("quantile of an empty ECDF");
  const std::uint64_t S = sorted_.size();
  if (k == 0) return sorted_.front();
  const std::uint64_t rank = (S * k + m - 1) / m;
  return sorted_[std::min<std::uint64_t>(rank, S) - 1];
}

WeightedEcdf weighted_ecdf(const ClusterAggregates& agg, const DesignSpec& design, Arm arm) {
  const auto pr = probabilities(design);
  // Aggregates are in design order (= id order), so a stable sort on value
  // leaves ties ordered by cluster id.
  std::vector<double> values = agg.totals(arm);
  const double weight = 1.0 / (static_cast<double>(design.C) * pr.arm_probability(arm));
  return WeightedEcdf(arm, std::move(values), weight);
}

WeightedEcdf weighted_ecdf(const ObservedSample& sample, const DesignSpec& design, Arm arm) {
  return weighted_ecdf(aggregate(sample, design), design, arm);
}

QuantileGrid quantile_grid(std::size_t S1, std::size_t S0) {
  if (S1 == 0 || S0 == 0) throw std::invalid_argument("quantile grid needs both arms non-empty");
  QuantileGrid g;
  const std::uint64_t L = std::lcm<std::uint64_t>(S1, S0);
  const std::uint64_t step1 = L / S1, step0 = L / S0;
  g.denominator = L;
  std::vector<std::uint64_t> pts;
  pts.reserve(S1 + S0 + 2);
  for (std::uint64_t k = 0; k <= S1; ++k) pts.push_back(k * step1);
  for (std::uint64_t k = 0; k <= S0; ++k) pts.push_back(k * step0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  g.numerators = std::move(pts);

  const std::size_t B = g.numerators.size() - 1;
  g.widths.resize(B);
  g.rank1.resize(B);
  g.rank0.resize(B);
  const double Ld = static_cast<double>(L);
  for (std::size_t h = 1; h <= B; ++h) {
    const std::uint64_t t = g.numerators[h];
    g.widths[h - 1] = static_cast<double>(t - g.numerators[h - 1]) / Ld;
    g.rank1[h - 1] = static_cast<std::size_t>((t + step1 - 1) / step1);
    g.rank0[h - 1] = static_cast<std::size_t>((t + step0 - 1) / step0);
  }
  return g;
}

namespace {

double ht_arm_mean(const ClusterAggregates& agg, const DesignSpec& design, const DesignProbabilities& pr,
                   Arm arm) {
  double sum = 0.0;
  for (const auto& ca : agg.clusters)
    if (ca.arm == arm) sum += ca.total_hat;
  return sum / (static_cast<double>(design.C) * pr.arm_probability(arm));
}

void require_arm(const ClusterAggregates& agg, Arm arm, std::size_t minimum) {
  std::size_t count = 0;
  for (const auto& ca : agg.clusters)
    if (ca.arm == arm) ++count;
  if (count < minimum)
    throw InsufficientArm(std::string(arm == Arm::treated ? "treated" : "control") + " arm has " +
                          std::to_string(count) + " sampled clusters; at least " + std::to_string(minimum) +
                          " are required");
}

// Observed same-arm double sum
//   sum_{c,c'} Delta_cc' Y_c Y_c' / (E[pair_cc'] E_d^2)
// with E[pair_cc] = E_d on the diagonal.
double cluster_pair_sum(const ClusterAggregates& agg, const DesignSpec& design, Arm arm) {
  const auto j = joint_inclusion(design);
  const auto dl = delta(design);
  const int d = arm_index(arm);
  const double e = j.arm_single(arm);
  const double pair = j.same_arm_pair(arm);
  double sum = 0.0, sum_sq = 0.0;
  for (const auto& ca : agg.clusters) {
    if (ca.arm != arm) continue;
    sum += ca.total_hat;
    sum_sq += ca.total_hat * ca.total_hat;
  }
  const double w_diag = dl.diag[d] / (e * e * e);
  const double w_off = dl.off[d] / (pair * e * e);
  return w_off * (sum * sum - sum_sq) + w_diag * sum_sq;
}

} // namespace

CovarianceBounds sigma_hat_bounds(const ClusterAggregates& agg, const DesignSpec& design) {
  require_arm(agg, Arm::treated, 1);
  require_arm(agg, Arm::control, 1);
  const auto pr = probabilities(design);
  const auto G = weighted_ecdf(agg, design, Arm::treated);
  const auto F = weighted_ecdf(agg, design, Arm::control);
  const auto grid = quantile_grid(G.size(), F.size());
  const std::size_t B = grid.segments();
  double high = 0.0, low = 0.0;
  for (std::size_t h = 0; h < B; ++h) {
    const double y1 = G.sorted()[grid.rank1[h] - 1];
    high += grid.widths[h] * y1 * F.sorted()[grid.rank0[h] - 1];
    low += grid.widths[h] * y1 * F.sorted()[grid.rank0[B - 1 - h] - 1];
  }
  const double m1 = ht_arm_mean(agg, design, pr, Arm::treated);
  const double m0 = ht_arm_mean(agg, design, pr, Arm::control);
  return {low - m1 * m0, high - m1 * m0};
}

CovarianceBounds sigma_hat_bounds(const ObservedSample& sample, const DesignSpec& design) {
  return sigma_hat_bounds(aggregate(sample, design), design);
}

double vhat_arm(const ClusterAggregates& agg, const DesignSpec& design, Arm arm) {
  require_arm(agg, arm, 2);
  const auto pr = probabilities(design);
  const double e = pr.arm_probability(arm);
  double unit_part = 0.0;
  for (const auto& ca : agg.clusters) {
    if (ca.arm != arm) continue;
    const auto& cd = design.clusters.at(ca.index);
    if (cd.n == 1 && cd.N > 1)
      throw InsufficientUnits("cluster " + cd.id +
                              " has n_c = 1 < N_c: the variance estimator needs at least two sampled units "
                              "per cluster (positive unit-pair inclusion probability)");
    const auto w = unit_variance_weights(cd.N, cd.n);
    double s = 0.0, s2 = 0.0;
    for (double y : ca.scaled_units) {
      s += y;
      s2 += y * y;
    }
    unit_part += w.apply(s, s2) / e;
  }
  const double C = static_cast<double>(design.C);
  return (cluster_pair_sum(agg, design, arm) + unit_part) / (C * C);
}

double vhat_arm(const ObservedSample& sample, const DesignSpec& design, Arm arm) {
  return vhat_arm(aggregate(sample, design), design, arm);
}

double conservative_estimate(const ClusterAggregates& agg, const DesignSpec& design) {
  require_arm(agg, Arm::treated, 2);
  require_arm(agg, Arm::control, 2);
  const auto pr = probabilities(design);
  double total = 0.0;
  for (Arm a : {Arm::treated, Arm::control}) {
    const double e = pr.arm_probability(a);
    if (e >= 1.0) throw DegeneratePrefactor("arm probability is 1; the conservative estimator is undefined");
    total += cluster_pair_sum(agg, design, a) / (1.0 - e);
  }
  const double C = static_cast<double>(design.C);
  return total / (C * C);
}

double conservative_estimate(const ObservedSample& sample, const DesignSpec& design) {
  return conservative_estimate(aggregate(sample, design), design);
}

BoundReport variance_interval(const ClusterAggregates& agg, const DesignSpec& design) {
  BoundReport r;
  r.v1_hat = vhat_arm(agg, design, Arm::treated);
  r.v0_hat = vhat_arm(agg, design, Arm::control);
  const auto sb = sigma_hat_bounds(agg, design);
  r.sigma_h = sb.sigma_h;
  r.sigma_l = sb.sigma_l;
  const double C = static_cast<double>(design.C);
  r.var_h = r.v1_hat + r.v0_hat + 2.0 / C * r.sigma_h;
  r.var_l = r.v1_hat + r.v0_hat + 2.0 / C * r.sigma_l;
  r.var_consv = conservative_estimate(agg, design);
  r.clamped = r.var_h < 0.0;
  r.se_h = std::sqrt(std::max(r.var_h, 0.0));
  return r;
}

BoundReport variance_interval(const ObservedSample& sample, const DesignSpec& design) {
  return variance_interval(aggregate(sample, design), design);
}

} // namespace cdinfer
