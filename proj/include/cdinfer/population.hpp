#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace cdinfer {

struct Unit {
  std::string id;
  double y0 = 0.0;
  double y1 = 0.0;
};

struct Cluster {
  std::string id;
  std::vector<Unit> units;

  std::size_t size() const noexcept { return units.size(); }
};

// Complete potential-outcome table. Clusters are kept sorted by id (and units
// by id within a cluster) so that every index-based computation is independent
// of input row order.
class FinitePopulation {
public:
  FinitePopulation() = default;
  explicit FinitePopulation(std::vector<Cluster> clusters);

  const std::vector<Cluster>& clusters() const noexcept { return clusters_; }
  const Cluster& cluster(std::size_t c) const { return clusters_.at(c); }
  std::size_t num_clusters() const noexcept { return clusters_.size(); }
  std::size_t num_units() const noexcept { return num_units_; }
  std::vector<std::size_t> cluster_sizes() const;

  // Same population with every outcome multiplied by k.
  FinitePopulation scaled(double k) const;

private:
  std::vector<Cluster> clusters_;
  std::size_t num_units_ = 0;
};

struct ClusterDesign {
  std::string id;
  std::size_t N = 0; // cluster size
  std::size_t n = 0; // second-stage sample size
};

// The known two-stage design: S of C clusters sampled, S1 of those treated,
// n_c of N_c units sampled within each sampled cluster.
struct DesignSpec {
  std::size_t C = 0;
  std::size_t S = 0;
  std::size_t S1 = 0;
  std::vector<ClusterDesign> clusters;

  std::size_t S0() const noexcept { return S - S1; }
  // Average cluster size.
  double nbar() const;
  // Sorts clusters by id.
  void canonicalize();
  // Index of a cluster id, if present (binary search, requires canonical order).
  std::optional<std::size_t> find(const std::string& id) const;
};

// Builds a design over the population's clusters with the given per-cluster
// second-stage sizes (in cluster order).
DesignSpec make_design(const FinitePopulation& pop, std::size_t S, std::size_t S1,
                       const std::vector<std::size_t>& n);

struct ValidationResult {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string message() const;
};

ValidationResult validate_design(const DesignSpec& design);
ValidationResult validate_design(const std::vector<std::size_t>& cluster_sizes,
                                 const DesignSpec& design);
ValidationResult validate_design(const FinitePopulation& pop, const DesignSpec& design);

struct ScaledOutcomes {
  double nbar = 0.0;
  // unit[c][i] = Y_ci(d) / nbar, indexed [d][c][i]
  std::vector<std::vector<double>> unit[2];
  // Scaled cluster totals, indexed [d][c].
  std::vector<double> total[2];
  // Scaled cluster means (total / N_c).
  std::vector<double> mean[2];
  // Population arm means (1/N) sum Y(d).
  double arm_mean[2] = {0.0, 0.0};

  std::size_t num_clusters() const noexcept { return total[0].size(); }
};

ScaledOutcomes scale_outcomes(const FinitePopulation& pop);

// Unit-level average treatment effect.
double compute_ate(const FinitePopulation& pop);
// The same effect written as the mean of scaled cluster effects.
double compute_ate_from_clusters(const ScaledOutcomes& scaled);

struct DesignDiagnostics {
  std::vector<double> omega_c;
  double omega = 1.0;
  std::optional<double> beta_hint;
  double omega_threshold = 0.0;
  std::vector<std::string> warnings;
};

// Relative cluster sizes and the cluster-size-heterogeneity advisory.
// beta_hint defaults to 0 (fixed sampling rate).
DesignDiagnostics diagnostics(const std::vector<std::size_t>& cluster_sizes,
                              std::optional<double> beta_hint = std::nullopt);
DesignDiagnostics diagnostics(const DesignSpec& design,
                              std::optional<double> beta_hint = std::nullopt);

} // namespace cdinfer
