#include "cdinfer/estimators.hpp"

#include <stdexcept>

#include "cdinfer/errors.hpp"

namespace cdinfer {

double ht_cluster_total(std::span<const double> ys, std::size_t n, std::size_t N, double nbar) {
  if (ys.empty() || n == 0) throw EmptyCluster("cluster has no sampled units");
  if (ys.size() != n)
    throw std::invalid_argument("ht_cluster_total: " + std::to_string(ys.size()) +
                                " outcomes for n_c = " + std::to_string(n));
  double sum = 0.0;
  for (double y : ys) sum += y;
  return (static_cast<double>(N) / static_cast<double>(n)) * sum / nbar;
}

std::vector<double> ClusterAggregates::totals(Arm a) const {
  std::vector<double> out;
  for (const auto& ca : clusters)
    if (ca.arm == a) out.push_back(ca.total_hat);
  return out;
}

ClusterAggregates aggregate(const ObservedSample& sample, const DesignSpec& design) {
  ClusterAggregates agg;
  agg.nbar = design.nbar();
  agg.clusters.reserve(sample.clusters.size());
  std::vector<double> ys;
  for (const auto& sc : sample.clusters) {
    const auto& cd = design.clusters.at(sc.index);
    ys.clear();
    for (const auto& u : sc.units) ys.push_back(u.y);
    ClusterAggregate ca;
    ca.index = sc.index;
    ca.arm = sc.treated ? Arm::treated : Arm::control;
    ca.total_hat = ht_cluster_total(ys, cd.n, cd.N, agg.nbar);
    ca.scaled_units.reserve(ys.size());
    for (double y : ys) ca.scaled_units.push_back(y / agg.nbar);
    agg.clusters.push_back(std::move(ca));
  }
  return agg;
}

double ht_ate(const ClusterAggregates& agg, const DesignSpec& design, const DesignProbabilities& pr) {
  const double e1 = pr.arm_probability(Arm::treated);
  const double e0 = pr.arm_probability(Arm::control);
  double sum = 0.0;
  for (const auto& ca : agg.clusters)
    sum += ca.arm == Arm::treated ? ca.total_hat / e1 : -ca.total_hat / e0;
  return sum / static_cast<double>(design.C);
}

double ht_ate(const ObservedSample& sample, const DesignSpec& design) {
  return ht_ate(aggregate(sample, design), design, probabilities(design));
}

double ht_ate_unit_level(const ObservedSample& sample, const DesignSpec& design) {
  const auto pr = probabilities(design);
  const double pq = pr.p * pr.q;
  const double pq0 = pr.p * (1.0 - pr.q);
  double N = 0.0;
  for (const auto& cd : design.clusters) N += static_cast<double>(cd.N);
  double sum = 0.0;
  for (const auto& sc : sample.clusters) {
    const double pi = pr.pi.at(sc.index);
    if (sc.units.empty()) throw EmptyCluster("cluster " + sc.id + " has no sampled units");
    for (const auto& u : sc.units) sum += sc.treated ? u.y / (pq * pi) : -u.y / (pq0 * pi);
  }
  return sum / N;
}

double infeasible_ate(const FinitePopulation& pop, const DesignSpec& design,
                      const ObservedSample& first_stage) {
  const auto pr = probabilities(design);
  const double nbar = static_cast<double>(pop.num_units()) / static_cast<double>(pop.num_clusters());
  const double e1 = pr.arm_probability(Arm::treated);
  const double e0 = pr.arm_probability(Arm::control);
  double sum = 0.0;
  for (const auto& sc : first_stage.clusters) {
    double total = 0.0;
    for (const auto& u : pop.cluster(sc.index).units) total += sc.treated ? u.y1 : u.y0;
    total /= nbar;
    sum += sc.treated ? total / e1 : -total / e0;
  }
  return sum / static_cast<double>(design.C);
}

double diff_in_means(const ObservedSample& sample) {
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (const auto& sc : sample.clusters) {
    const int d = sc.treated ? 1 : 0;
    for (const auto& u : sc.units) {
      sum[d] += u.y;
      ++count[d];
    }
  }
  if (count[0] == 0 || count[1] == 0) throw NoArmData("difference in means needs sampled units in both arms");
  return sum[1] / static_cast<double>(count[1]) - sum[0] / static_cast<double>(count[0]);
}

} // namespace cdinfer
