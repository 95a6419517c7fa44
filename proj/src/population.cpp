#include "cdinfer/population.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cdinfer/errors.hpp"

namespace cdinfer {

FinitePopulation::FinitePopulation(std::vector<Cluster> clusters)
    : clusters_(std::move(clusters)) {
  for (auto& cl : clusters_) {
    if (cl.units.empty()) throw SchemaError("cluster " + cl.id + " has no units");
    std::stable_sort(cl.units.begin(), cl.units.end(),
                     [](const Unit& a, const Unit& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < cl.units.size(); ++i) {
      if (cl.units[i].id == cl.units[i - 1].id)
        throw SchemaError("duplicate unit id " + cl.units[i].id + " in cluster " + cl.id);
    }
    for (const auto& u : cl.units) {
      if (!std::isfinite(u.y0) || !std::isfinite(u.y1))
        throw SchemaError("non-finite outcome in cluster " + cl.id);
    }
    num_units_ += cl.units.size();
  }
  std::stable_sort(clusters_.begin(), clusters_.end(),
                   [](const Cluster& a, const Cluster& b) { return a.id < b.id; });
  for (std::size_t c = 1; c < clusters_.size(); ++c) {
    if (clusters_[c].id == clusters_[c - 1].id)
      throw SchemaError("duplicate cluster id " + clusters_[c].id);
  }
}

std::vector<std::size_t> FinitePopulation::cluster_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(clusters_.size());
  for (const auto& cl : clusters_) sizes.push_back(cl.size());
  return sizes;
}

FinitePopulation FinitePopulation::scaled(double k) const {
  auto copy = clusters_;
  for (auto& cl : copy)
    for (auto& u : cl.units) {
      u.y0 *= k;
      u.y1 *= k;
    }
  return FinitePopulation(std::move(copy));
}

double DesignSpec::nbar() const {
  if (clusters.empty()) return 0.0;
  double total = 0.0;
  for (const auto& cd : clusters) total += static_cast<double>(cd.N);
  return total / static_cast<double>(clusters.size());
}

void DesignSpec::canonicalize() {
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const ClusterDesign& a, const ClusterDesign& b) { return a.id < b.id; });
}

std::optional<std::size_t> DesignSpec::find(const std::string& id) const {
  auto it = std::lower_bound(clusters.begin(), clusters.end(), id,
                             [](const ClusterDesign& cd, const std::string& key) { return cd.id < key; });
  if (it == clusters.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - clusters.begin());
}

DesignSpec make_design(const FinitePopulation& pop, std::size_t S, std::size_t S1,
                       const std::vector<std::size_t>& n) {
  if (n.size() != pop.num_clusters())
    throw std::invalid_argument("make_design: one sample size per cluster required");
  DesignSpec d;
  d.C = pop.num_clusters();
  d.S = S;
  d.S1 = S1;
  d.clusters.reserve(d.C);
  for (std::size_t c = 0; c < d.C; ++c)
    d.clusters.push_back({pop.cluster(c).id, pop.cluster(c).size(), n[c]});
  return d;
}

std::string ValidationResult::message() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < violations.size(); ++k) {
    if (k) os << "; ";
    os << violations[k];
  }
  return os.str();
}

ValidationResult validate_design(const DesignSpec& design) {
  ValidationResult r;
  auto& v = r.violations;
  if (design.C < 2) v.push_back("C = " + std::to_string(design.C) + " < 2 clusters");
  if (design.clusters.size() != design.C)
    v.push_back("design lists " + std::to_string(design.clusters.size()) + " clusters but C = " +
                std::to_string(design.C));
  if (design.S < 1 || design.S > design.C)
    v.push_back("S = " + std::to_string(design.S) + " outside [1, C]");
  if (design.S1 == 0)
    v.push_back("q = 0 outside (0,1)");
  else if (design.S1 >= design.S)
    v.push_back("q = 1 outside (0,1)");

  std::set<std::string> seen;
  for (const auto& cd : design.clusters) {
    if (!seen.insert(cd.id).second) v.push_back("duplicate cluster id " + cd.id);
    if (cd.N == 0) v.push_back("cluster " + cd.id + " has N_c = 0");
    if (cd.n == 0)
      v.push_back("second-stage probability zero in cluster " + cd.id + " (n_c = 0)");
    else if (cd.n > cd.N)
      v.push_back("cluster " + cd.id + " has n_c = " + std::to_string(cd.n) + " > N_c = " +
                  std::to_string(cd.N));
  }
  return r;
}

ValidationResult validate_design(const std::vector<std::size_t>& cluster_sizes,
                                 const DesignSpec& design) {
  auto r = validate_design(design);
  if (cluster_sizes.size() != design.clusters.size()) {
    r.violations.push_back("population has " + std::to_string(cluster_sizes.size()) +
                           " clusters but design lists " + std::to_string(design.clusters.size()));
    return r;
  }
  for (std::size_t c = 0; c < cluster_sizes.size(); ++c) {
    if (cluster_sizes[c] != design.clusters[c].N)
      r.violations.push_back("cluster " + design.clusters[c].id + " has " +
                             std::to_string(cluster_sizes[c]) + " units but design N_c = " +
                             std::to_string(design.clusters[c].N));
  }
  return r;
}

ValidationResult validate_design(const FinitePopulation& pop, const DesignSpec& design) {
  auto r = validate_design(pop.cluster_sizes(), design);
  if (pop.num_clusters() == design.clusters.size()) {
    for (std::size_t c = 0; c < pop.num_clusters(); ++c) {
      if (pop.cluster(c).id != design.clusters[c].id) {
        r.violations.push_back("population cluster " + pop.cluster(c).id +
                               " does not match design cluster " + design.clusters[c].id);
        break;
      }
    }
  }
  return r;
}

ScaledOutcomes scale_outcomes(const FinitePopulation& pop) {
  ScaledOutcomes s;
  const std::size_t C = pop.num_clusters();
  s.nbar = static_cast<double>(pop.num_units()) / static_cast<double>(C);
  for (int d = 0; d < 2; ++d) {
    s.unit[d].resize(C);
    s.total[d].assign(C, 0.0);
    s.mean[d].assign(C, 0.0);
  }
  double grand[2] = {0.0, 0.0};
  for (std::size_t c = 0; c < C; ++c) {
    const auto& cl = pop.cluster(c);
    for (int d = 0; d < 2; ++d) s.unit[d][c].reserve(cl.size());
    for (const auto& u : cl.units) {
      s.unit[0][c].push_back(u.y0 / s.nbar);
      s.unit[1][c].push_back(u.y1 / s.nbar);
    }
    for (int d = 0; d < 2; ++d) {
      double t = 0.0;
      for (double y : s.unit[d][c]) t += y;
      s.total[d][c] = t;
      s.mean[d][c] = cl.size() ? t / static_cast<double>(cl.size()) : 0.0;
      grand[d] += t;
    }
  }
  for (int d = 0; d < 2; ++d) s.arm_mean[d] = grand[d] / static_cast<double>(C);
  return s;
}

double compute_ate(const FinitePopulation& pop) {
  double sum = 0.0;
  for (const auto& cl : pop.clusters())
    for (const auto& u : cl.units) sum += u.y1 - u.y0;
  return sum / static_cast<double>(pop.num_units());
}

double compute_ate_from_clusters(const ScaledOutcomes& scaled) {
  double sum = 0.0;
  const std::size_t C = scaled.num_clusters();
  for (std::size_t c = 0; c < C; ++c) sum += scaled.total[1][c] - scaled.total[0][c];
  return sum / static_cast<double>(C);
}

DesignDiagnostics diagnostics(const std::vector<std::size_t>& cluster_sizes,
                              std::optional<double> beta_hint) {
  DesignDiagnostics dg;
  dg.beta_hint = beta_hint;
  const double C = static_cast<double>(cluster_sizes.size());
  if (cluster_sizes.empty()) return dg;
  const double nbar =
      static_cast<double>(std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::size_t{0})) / C;
  dg.omega = 0.0;
  for (auto N : cluster_sizes) {
    dg.omega_c.push_back(static_cast<double>(N) / nbar);
    dg.omega = std::max(dg.omega, dg.omega_c.back());
  }
  const double beta = beta_hint.value_or(0.0);
  dg.omega_threshold = std::pow(C, (1.0 - 2.0 * beta) / 3.0);
  if (dg.omega >= dg.omega_threshold) {
    std::ostringstream os;
    os << "cluster-size heterogeneity: omega = " << dg.omega << " >= C^((1-2*beta)/3) = "
       << dg.omega_threshold << " (beta = " << beta
       << "); normal approximation may be unreliable";
    dg.warnings.push_back(os.str());
  }
  return dg;
}

DesignDiagnostics diagnostics(const DesignSpec& design, std::optional<double> beta_hint) {
  std::vector<std::size_t> sizes;
  sizes.reserve(design.clusters.size());
  for (const auto& cd : design.clusters) sizes.push_back(cd.N);
  return diagnostics(sizes, beta_hint);
}

} // namespace cdinfer
