#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdinfer/population.hpp"
#include "cdinfer/rng.hpp"

namespace cdinfer {

struct SampledUnit {
  std::string id;
  double y = 0.0;
};

struct SampledCluster {
  std::string id;
  std::size_t index = 0; // position in DesignSpec::clusters
  bool treated = false;
  std::vector<SampledUnit> units;
};

// One realization of the two-stage design: sampled clusters in design order.
struct ObservedSample {
  std::vector<SampledCluster> clusters;

  std::size_t num_treated() const noexcept;
  std::size_t num_units() const noexcept;
};

bool operator==(const SampledUnit& a, const SampledUnit& b);
bool operator==(const SampledCluster& a, const SampledCluster& b);
bool operator==(const ObservedSample& a, const ObservedSample& b);

// Draws S of C clusters, S1 of those for treatment and n_c units within each
// sampled cluster, each stage by partial Fisher-Yates on its own index array.
// The draw order (clusters, assignment, then units cluster by cluster in
// design order) is fixed, so the sample is a function of the seed alone.
ObservedSample draw_sample(const FinitePopulation& pop, const DesignSpec& design, std::uint64_t seed);

// Chooses k of n indices uniformly without replacement; result sorted.
std::vector<std::size_t> srswor(std::size_t n, std::size_t k, Rng& rng);

// Independent second-stage draws for both arms of every cluster (the
// counterfactual used by the plug-in variance). sampled[d][c] holds the
// sampled Y(d) outcomes of cluster c.
struct BothArmDraw {
  std::vector<std::vector<double>> sampled[2];
};

BothArmDraw draw_both_arms(const FinitePopulation& pop, const DesignSpec& design, std::uint64_t seed);

// Number of distinct realizations:
//   sum over cluster subsets of C(S,S1) * prod_{sampled c} C(N_c, n_c).
// Saturates at +inf in floating point.
double realization_count(const DesignSpec& design);

constexpr double kMaxRealizations = 1e6;

// Visits every realization with its exact probability
//   1 / [C(C,S) C(S,S1) prod_{sampled c} C(N_c, n_c)].
// Throws TooLarge when the count exceeds `limit`.
void for_each_realization(const FinitePopulation& pop, const DesignSpec& design,
                          const std::function<void(const ObservedSample&, double)>& visit,
                          double limit = kMaxRealizations);

} // namespace cdinfer
