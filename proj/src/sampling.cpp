#include "cdinfer/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdinfer/errors.hpp"
#include "cdinfer/rng.hpp"

namespace cdinfer {

double Rng::normal() noexcept {
  const double u1 = uniform_open_closed();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::size_t ObservedSample::num_treated() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(clusters.begin(), clusters.end(), [](const SampledCluster& c) { return c.treated; }));
}

std::size_t ObservedSample::num_units() const noexcept {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.units.size();
  return n;
}

bool operator==(const SampledUnit& a, const SampledUnit& b) { return a.id == b.id && a.y == b.y; }

bool operator==(const SampledCluster& a, const SampledCluster& b) {
  return a.id == b.id && a.index == b.index && a.treated == b.treated && a.units == b.units;
}

bool operator==(const ObservedSample& a, const ObservedSample& b) { return a.clusters == b.clusters; }

std::vector<std::size_t> srswor(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

ObservedSample draw_sample(const FinitePopulation& pop, const DesignSpec& design, std::uint64_t seed) {
  Rng rng(seed);
  const auto sampled = srswor(design.C, design.S, rng);
  const auto treated_pos = srswor(design.S, design.S1, rng);

  ObservedSample out;
  out.clusters.resize(sampled.size());
  for (std::size_t k = 0; k < sampled.size(); ++k) {
    out.clusters[k].index = sampled[k];
    out.clusters[k].id = design.clusters[sampled[k]].id;
  }
  for (auto pos : treated_pos) out.clusters[pos].treated = true;

  for (auto& sc : out.clusters) {
    const auto& cl = pop.cluster(sc.index);
    const auto& cd = design.clusters[sc.index];
    const auto units = srswor(cd.N, cd.n, rng);
    sc.units.reserve(units.size());
    for (auto i : units) {
      const auto& u = cl.units[i];
      sc.units.push_back({u.id, sc.treated ? u.y1 : u.y0});
    }
  }
  return out;
}

BothArmDraw draw_both_arms(const FinitePopulation& pop, const DesignSpec& design, std::uint64_t seed) {
  Rng rng(seed);
  BothArmDraw draw;
  for (int d = 0; d < 2; ++d) draw.sampled[d].resize(design.C);
  for (std::size_t c = 0; c < design.C; ++c) {
    const auto& cl = pop.cluster(c);
    const auto& cd = design.clusters[c];
    for (int d = 0; d < 2; ++d) {
      const auto units = srswor(cd.N, cd.n, rng);
      auto& ys = draw.sampled[d][c];
      ys.reserve(units.size());
      for (auto i : units) ys.push_back(d == 1 ? cl.units[i].y1 : cl.units[i].y0);
    }
  }
  return draw;
}

namespace {

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

// Advances a sorted k-subset of {0..n-1} in lexicographic order.
bool next_combination(std::vector<std::size_t>& comb, std::size_t n) {
  const std::size_t k = comb.size();
  for (std::size_t i = k; i-- > 0;) {
    if (comb[i] < n - k + i) {
      ++comb[i];
      for (std::size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
      return true;
    }
  }
  return false;
}

std::vector<std::size_t> first_combination(std::size_t k) {
  std::vector<std::size_t> comb(k);
  std::iota(comb.begin(), comb.end(), std::size_t{0});
  return comb;
}

// sum over k-subsets of prod of w over the subset (elementary symmetric polynomial).
double elementary_symmetric(const std::vector<double>& w, std::size_t k) {
  std::vector<double> e(k + 1, 0.0);
  e[0] = 1.0;
  for (double x : w)
    for (std::size_t j = k; j >= 1; --j) e[j] += e[j - 1] * x;
  return e[k];
}

} // namespace

double realization_count(const DesignSpec& design) {
  std::vector<double> w;
  w.reserve(design.clusters.size());
  for (const auto& cd : design.clusters) w.push_back(binomial(cd.N, cd.n));
  return binomial(design.S, design.S1) * elementary_symmetric(w, design.S);
}

void for_each_realization(const FinitePopulation& pop, const DesignSpec& design,
                          const std::function<void(const ObservedSample&, double)>& visit,
                          double limit) {
  const double count = realization_count(design);
  if (!(count <= limit))
    throw TooLarge("design has " + std::to_string(static_cast<long double>(count)) +
                       " realizations, more than the enumeration limit",
                   count);

  const double first_stage = binomial(design.C, design.S) * binomial(design.S, design.S1);
  ObservedSample sample;
  sample.clusters.resize(design.S);

  auto subset = first_combination(design.S);
  do {
    double unit_ways = 1.0;
    for (auto c : subset) unit_ways *= binomial(design.clusters[c].N, design.clusters[c].n);
    const double prob = 1.0 / (first_stage * unit_ways);

    auto treated = first_combination(design.S1);
    do {
      for (std::size_t k = 0; k < design.S; ++k) {
        auto& sc = sample.clusters[k];
        sc.index = subset[k];
        sc.id = design.clusters[subset[k]].id;
        sc.treated = false;
      }
      for (auto pos : treated) sample.clusters[pos].treated = true;

      // Odometer over the unit subsets of the sampled clusters.
      std::vector<std::vector<std::size_t>> units(design.S);
      for (std::size_t k = 0; k < design.S; ++k) units[k] = first_combination(design.clusters[subset[k]].n);
      for (;;) {
        for (std::size_t k = 0; k < design.S; ++k) {
          auto& sc = sample.clusters[k];
          const auto& cl = pop.cluster(sc.index);
          sc.units.clear();
          for (auto i : units[k]) sc.units.push_back({cl.units[i].id, sc.treated ? cl.units[i].y1 : cl.units[i].y0});
        }
        visit(sample, prob);

        std::size_t k = design.S;
        while (k-- > 0) {
          if (next_combination(units[k], design.clusters[subset[k]].N)) break;
          units[k] = first_combination(design.clusters[subset[k]].n);
        }
        if (k == static_cast<std::size_t>(-1)) break;
      }
    } while (next_combination(treated, design.S));
  } while (next_combination(subset, design.C));
}

} // namespace cdinfer
