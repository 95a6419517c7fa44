#pragma once

// Independent oracles for the tests. Everything here is written directly from
// the definitions (explicit indicator loops, brute-force enumeration, generic
// matrix algebra) and deliberately shares no code with the library beyond the
// data types.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cdinfer/population.hpp"
#include "cdinfer/rng.hpp"
#include "cdinfer/sampling.hpp"

namespace testsupport {

using cdinfer::Cluster;
using cdinfer::ClusterDesign;
using cdinfer::DesignSpec;
using cdinfer::FinitePopulation;
using cdinfer::ObservedSample;
using cdinfer::Rng;
using cdinfer::SampledCluster;
using cdinfer::SampledUnit;
using cdinfer::Unit;

inline std::string label(char prefix, std::size_t k) {
  std::string s = std::to_string(k);
  while (s.size() < 3) s.insert(s.begin(), '0');
  return std::string(1, prefix) + s;
}

// outcomes[c][i] = {y0, y1}
inline FinitePopulation make_population(const std::vector<std::vector<std::pair<double, double>>>& outcomes) {
  std::vector<Cluster> clusters;
  for (std::size_t c = 0; c < outcomes.size(); ++c) {
    Cluster cl;
    cl.id = label('k', c);
    for (std::size_t i = 0; i < outcomes[c].size(); ++i)
      cl.units.push_back(Unit{label('u', i), outcomes[c][i].first, outcomes[c][i].second});
    clusters.push_back(std::move(cl));
  }
  return FinitePopulation(std::move(clusters));
}

// Heterogeneous random population: cluster effects, unit effects and noise.
inline FinitePopulation random_population(Rng& rng, const std::vector<std::size_t>& sizes, double spread = 3.0) {
  std::vector<std::vector<std::pair<double, double>>> out(sizes.size());
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double level = rng.normal(0.0, spread);
    const double effect = rng.normal(1.0, spread);
    for (std::size_t i = 0; i < sizes[c]; ++i) {
      const double y0 = level + rng.normal(0.0, 1.0);
      const double y1 = y0 + effect + rng.normal(0.0, 1.0);
      out[c].push_back({y0, y1});
    }
  }
  return make_population(out);
}

inline DesignSpec design_for(const FinitePopulation& pop, std::size_t S, std::size_t S1,
                             const std::vector<std::size_t>& n) {
  DesignSpec d;
  d.C = pop.num_clusters();
  d.S = S;
  d.S1 = S1;
  for (std::size_t c = 0; c < d.C; ++c)
    d.clusters.push_back(ClusterDesign{pop.cluster(c).id, pop.cluster(c).size(), n[c]});
  return d;
}

inline double nbar_of(const FinitePopulation& pop) {
  return static_cast<double>(pop.num_units()) / static_cast<double>(pop.num_clusters());
}

inline double binom(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// All k-subsets of {0..n-1} as bit masks, by brute force over 2^n.
inline std::vector<std::uint32_t> subsets(std::size_t n, std::size_t k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < (1u << n); ++m)
    if (static_cast<std::size_t>(std::popcount(m)) == k) out.push_back(m);
  return out;
}

// Brute-force design measure: every status vector in {out, control, treated}^C
// with S1 treated and S0 control, times every within-cluster unit subset.
// Weight each realization with brute_probability.
inline void brute_realizations(const FinitePopulation& pop, const DesignSpec& d,
                               const std::function<void(const ObservedSample&)>& visit) {
  const std::size_t C = d.C;
  std::vector<int> status(C, 0); // 0 out, 1 control, 2 treated
  std::function<void(std::size_t, std::size_t, std::size_t)> first;
  std::function<void(std::size_t, ObservedSample&)> second;
  second = [&](std::size_t c, ObservedSample& s) {
    if (c == C) {
      visit(s);
      return;
    }
    if (status[c] == 0) {
      second(c + 1, s);
      return;
    }
    const auto& cl = pop.cluster(c);
    for (std::uint32_t mask : subsets(cl.size(), d.clusters[c].n)) {
      SampledCluster sc;
      sc.id = cl.id;
      sc.index = c;
      sc.treated = status[c] == 2;
      for (std::size_t i = 0; i < cl.size(); ++i)
        if (mask & (1u << i)) sc.units.push_back(SampledUnit{cl.units[i].id, sc.treated ? cl.units[i].y1 : cl.units[i].y0});
      s.clusters.push_back(std::move(sc));
      second(c + 1, s);
      s.clusters.pop_back();
    }
  };
  first = [&](std::size_t c, std::size_t treated, std::size_t control) {
    if (c == C) {
      if (treated == d.S1 && control == d.S - d.S1) {
        ObservedSample s;
        second(0, s);
      }
      return;
    }
    for (int st = 0; st < 3; ++st) {
      status[c] = st;
      first(c + 1, treated + (st == 2), control + (st == 1));
    }
  };
  first(0, 0, 0);
}

// Probability of one realization: uniform over cluster subsets and
// assignments, then uniform over the unit subsets of each sampled cluster.
inline double brute_probability(const ObservedSample& s, const DesignSpec& d) {
  double prob = 1.0 / (binom(d.C, d.S) * binom(d.S, d.S1));
  for (const auto& sc : s.clusters) prob /= binom(d.clusters[sc.index].N, d.clusters[sc.index].n);
  return prob;
}

// Probability-weighted mean and variance of a statistic over the brute-force
// realizations.
struct Moments {
  double mean = 0.0;
  double var = 0.0;
  std::size_t count = 0;
  double total_probability = 0.0;
};

inline Moments brute_moments(const FinitePopulation& pop, const DesignSpec& d,
                             const std::function<double(const ObservedSample&)>& stat) {
  std::vector<std::pair<double, double>> v;
  brute_realizations(pop, d, [&](const ObservedSample& s) { v.emplace_back(stat(s), brute_probability(s, d)); });
  Moments m;
  m.count = v.size();
  for (const auto& [x, w] : v) {
    m.mean += w * x;
    m.total_probability += w;
  }
  for (const auto& [x, w] : v) m.var += w * (x - m.mean) * (x - m.mean);
  return m;
}

// Scaled within-cluster HT total, straight from the definition.
inline double naive_total(const SampledCluster& sc, const ClusterDesign& cd, double nbar) {
  double s = 0.0;
  for (const auto& u : sc.units) s += u.y / nbar / (static_cast<double>(cd.n) / static_cast<double>(cd.N));
  return s;
}

// Unit-level HT form of tau_hat: (1/N) sum R D R_i Y / (pq pi) - ...
inline double naive_tau_hat(const ObservedSample& s, const DesignSpec& d) {
  const double C = static_cast<double>(d.C);
  const double p = static_cast<double>(d.S) / C;
  const double q = static_cast<double>(d.S1) / static_cast<double>(d.S);
  double N = 0.0;
  for (const auto& cd : d.clusters) N += static_cast<double>(cd.N);
  double t = 0.0;
  for (const auto& sc : s.clusters) {
    const auto& cd = d.clusters[sc.index];
    const double pi = static_cast<double>(cd.n) / static_cast<double>(cd.N);
    for (const auto& u : sc.units) t += sc.treated ? u.y / (p * q * pi) : -u.y / (p * (1.0 - q) * pi);
  }
  return t / N;
}

inline double naive_tau(const FinitePopulation& pop) {
  double s = 0.0;
  for (const auto& cl : pop.clusters())
    for (const auto& u : cl.units) s += u.y1 - u.y0;
  return s / static_cast<double>(pop.num_units());
}

// HT on true totals for the realized first stage.
inline double naive_tau_bar(const FinitePopulation& pop, const ObservedSample& s, const DesignSpec& d) {
  const double C = static_cast<double>(d.C);
  const double p = static_cast<double>(d.S) / C;
  const double q = static_cast<double>(d.S1) / static_cast<double>(d.S);
  const double nbar = nbar_of(pop);
  double t = 0.0;
  for (const auto& sc : s.clusters) {
    double total = 0.0;
    for (const auto& u : pop.cluster(sc.index).units) total += (sc.treated ? u.y1 : u.y0) / nbar;
    t += sc.treated ? total / (p * q) : -total / (p * (1.0 - q));
  }
  return t / C;
}

// Exact variances from the closed forms, with the second-stage factor in its
// pi-tilde form (1-pi)(1-pi~)/(pi(pi-pi~)).
struct NaiveVariance {
  double infeasible = 0.0;
  double feasible = 0.0;
  double consv = 0.0;
};

inline NaiveVariance naive_exact_variance(const FinitePopulation& pop, const DesignSpec& d) {
  const std::size_t Cn = pop.num_clusters();
  const double C = static_cast<double>(Cn);
  const double p = static_cast<double>(d.S) / C;
  const double q = static_cast<double>(d.S1) / static_cast<double>(d.S);
  const double nbar = nbar_of(pop);
  std::vector<double> t1(Cn, 0.0), t0(Cn, 0.0);
  for (std::size_t c = 0; c < Cn; ++c)
    for (const auto& u : pop.cluster(c).units) {
      t1[c] += u.y1 / nbar;
      t0[c] += u.y0 / nbar;
    }
  const double m1 = std::accumulate(t1.begin(), t1.end(), 0.0) / C;
  const double m0 = std::accumulate(t0.begin(), t0.end(), 0.0) / C;
  double s1 = 0.0, s0 = 0.0, st = 0.0;
  for (std::size_t c = 0; c < Cn; ++c) {
    s1 += (t1[c] - m1) * (t1[c] - m1);
    s0 += (t0[c] - m0) * (t0[c] - m0);
    const double e = (t1[c] - t0[c]) - (m1 - m0);
    st += e * e;
  }
  s1 /= C - 1.0;
  s0 /= C - 1.0;
  st /= C - 1.0;
  NaiveVariance v;
  v.infeasible = (s1 / (p * q) + s0 / (p * (1.0 - q)) - st) / C;
  double second = 0.0;
  for (std::size_t c = 0; c < Cn; ++c) {
    const auto& cd = d.clusters[c];
    if (cd.n == cd.N) continue;
    const double pi = static_cast<double>(cd.n) / static_cast<double>(cd.N);
    const double pit = static_cast<double>(cd.n - 1) / static_cast<double>(cd.N - 1);
    const double f = (1.0 - pi) * (1.0 - pit) / (pi * (pi - pit));
    const auto& units = pop.cluster(c).units;
    const double Nc = static_cast<double>(units.size());
    double a1 = 0.0, a0 = 0.0;
    for (const auto& u : units) {
      a1 += u.y1 / nbar / Nc;
      a0 += u.y0 / nbar / Nc;
    }
    double w1 = 0.0, w0 = 0.0;
    for (const auto& u : units) {
      w1 += (u.y1 / nbar - a1) * (u.y1 / nbar - a1);
      w0 += (u.y0 / nbar - a0) * (u.y0 / nbar - a0);
    }
    w1 /= Nc - 1.0;
    w0 /= Nc - 1.0;
    second += f * (w1 / (p * q) + w0 / (p * (1.0 - q)));
  }
  v.feasible = v.infeasible + second / (C * C);
  v.consv = v.feasible + st / C;
  return v;
}

// Arm-d pieces with explicit double loops over indicators, as displayed:
// cluster pairs weighted Delta/(E[pair] E E), unit pairs Delta/(E[RR] pi pi).
// `obs` lists (design index, sampled scaled unit outcomes) of the observed
// arm-d clusters; `ht_weight` multiplies each unit block (1/E_d for the
// feasible estimator, 1 for the plug-in).
inline double naive_arm_variance(const DesignSpec& d, bool treated,
                                 const std::vector<std::pair<std::size_t, std::vector<double>>>& obs,
                                 bool feasible) {
  const double C = static_cast<double>(d.C);
  const double Sd = static_cast<double>(treated ? d.S1 : d.S - d.S1);
  const double E = Sd / C;
  const double pair = Sd * (Sd - 1.0) / (C * (C - 1.0));
  double total = 0.0;
  std::vector<double> yhat;
  for (const auto& [c, ys] : obs) {
    const auto& cd = d.clusters[c];
    const double pi = static_cast<double>(cd.n) / static_cast<double>(cd.N);
    double s = 0.0;
    for (double y : ys) s += y / pi;
    yhat.push_back(s);
  }
  for (std::size_t a = 0; a < obs.size(); ++a)
    for (std::size_t b = 0; b < obs.size(); ++b) {
      const double joint = a == b ? E : pair;
      const double delta = joint - E * E;
      total += delta * yhat[a] * yhat[b] / ((feasible ? joint : 1.0) * E * E);
    }
  for (const auto& [c, ys] : obs) {
    const auto& cd = d.clusters[c];
    const double N = static_cast<double>(cd.N), n = static_cast<double>(cd.n);
    const double pi = n / N;
    const double upair = cd.N > 1 ? n * (n - 1.0) / (N * (N - 1.0)) : 0.0;
    double block = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) {
        const double joint = i == j ? pi : upair;
        const double delta = joint - pi * pi;
        if (delta == 0.0) continue;
        block += delta * ys[i] * ys[j] / (joint * pi * pi);
      }
    total += feasible ? block / E : block;
  }
  return total / (C * C);
}

inline std::vector<std::pair<std::size_t, std::vector<double>>> arm_blocks(const ObservedSample& s, bool treated,
                                                                           double nbar) {
  std::vector<std::pair<std::size_t, std::vector<double>>> out;
  for (const auto& sc : s.clusters) {
    if (sc.treated != treated) continue;
    std::vector<double> ys;
    for (const auto& u : sc.units) ys.push_back(u.y / nbar);
    out.emplace_back(sc.index, std::move(ys));
  }
  return out;
}

// Design expectation of the plug-in arm variance: average the plug-in over
// every combination of second-stage subsets of all C clusters.
inline double naive_plugin_expectation(const FinitePopulation& pop, const DesignSpec& d, bool treated) {
  const std::size_t C = d.C;
  const double nbar = nbar_of(pop);
  std::vector<std::vector<std::uint32_t>> subs(C);
  for (std::size_t c = 0; c < C; ++c) subs[c] = subsets(pop.cluster(c).size(), d.clusters[c].n);
  std::vector<std::size_t> pick(C, 0);
  double sum = 0.0;
  std::size_t count = 0;
  for (;;) {
    std::vector<std::pair<std::size_t, std::vector<double>>> blocks;
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> ys;
      const auto& units = pop.cluster(c).units;
      for (std::size_t i = 0; i < units.size(); ++i)
        if (subs[c][pick[c]] & (1u << i)) ys.push_back((treated ? units[i].y1 : units[i].y0) / nbar);
      blocks.emplace_back(c, std::move(ys));
    }
    sum += naive_arm_variance(d, treated, blocks, false);
    ++count;
    std::size_t c = 0;
    while (c < C && ++pick[c] == subs[c].size()) pick[c++] = 0;
    if (c == C) break;
  }
  return sum / static_cast<double>(count);
}

// Generic small dense matrix helpers for the sandwich oracle.
using Matrix = std::vector<std::vector<double>>;

inline Matrix transpose(const Matrix& a) {
  Matrix t(a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
  return t;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix r(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) r[i][j] += a[i][k] * b[k][j];
  return r;
}

inline Matrix invert(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(inv[col], inv[piv]);
    const double div = a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] /= div;
      inv[col][j] /= div;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

// Direct-matrix cluster-robust sandwich: (X'X)^-1 [sum_g X_g' e_g e_g' X_g] (X'X)^-1.
inline double naive_lz_variance(const ObservedSample& s, bool cr1) {
  Matrix X;
  std::vector<double> y;
  std::vector<std::size_t> group;
  for (std::size_t g = 0; g < s.clusters.size(); ++g)
    for (const auto& u : s.clusters[g].units) {
      X.push_back({1.0, s.clusters[g].treated ? 1.0 : 0.0});
      y.push_back(u.y);
      group.push_back(g);
    }
  const Matrix Xt = transpose(X);
  const Matrix bread = invert(matmul(Xt, X));
  Matrix Y(y.size(), std::vector<double>(1));
  for (std::size_t i = 0; i < y.size(); ++i) Y[i][0] = y[i];
  const Matrix beta = matmul(bread, matmul(Xt, Y));
  Matrix meat(2, std::vector<double>(2, 0.0));
  for (std::size_t g = 0; g < s.clusters.size(); ++g) {
    Matrix score(2, std::vector<double>(1, 0.0));
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (group[i] != g) continue;
      const double e = y[i] - beta[0][0] * X[i][0] - beta[1][0] * X[i][1];
      score[0][0] += X[i][0] * e;
      score[1][0] += X[i][1] * e;
    }
    const Matrix outer = matmul(score, transpose(score));
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) meat[a][b] += outer[a][b];
  }
  const Matrix V = matmul(matmul(bread, meat), bread);
  double factor = 1.0;
  if (cr1) {
    const double G = static_cast<double>(s.clusters.size());
    const double n = static_cast<double>(y.size());
    factor = G / (G - 1.0) * (n - 1.0) / (n - 2.0);
  }
  return factor * V[1][1];
}

// Left-continuous inverse of a mass-1 ECDF over `values` by linear scan:
// the smallest observed y with (#values <= y)/size >= u.
inline double scan_quantile(std::vector<double> values, double u) {
  std::sort(values.begin(), values.end());
  for (double y : values) {
    std::size_t k = 0;
    for (double v : values) k += v <= y ? 1 : 0;
    if (static_cast<double>(k) / static_cast<double>(values.size()) >= u) return y;
  }
  return values.back();
}

// Midpoint-rule coupling integral  int_0^1 G^-1(u) F^-1(u or 1-u) du  with
// M cells, M a multiple of lcm(|a|, |b|) so no cell straddles a step.
inline double coupling_integral(const std::vector<double>& a, const std::vector<double>& b, bool reversed,
                                std::size_t min_cells = 100000) {
  const std::size_t L = std::lcm(a.size(), b.size());
  const std::size_t M = ((min_cells + L - 1) / L) * L;
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  long double sum = 0.0L;
  for (std::size_t k = 0; k < M; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(M);
    const double v = reversed ? 1.0 - u : u;
    // The inverse of a mass-1 step function at u is order statistic ceil(n u).
    const auto ia = static_cast<std::size_t>(std::ceil(u * static_cast<double>(sa.size())));
    const auto ib = static_cast<std::size_t>(std::ceil(v * static_cast<double>(sb.size())));
    sum += static_cast<long double>(sa[std::clamp<std::size_t>(ia, 1, sa.size()) - 1]) *
           sb[std::clamp<std::size_t>(ib, 1, sb.size()) - 1];
  }
  return static_cast<double>(sum / static_cast<long double>(M));
}

// Brute force over all C! pairings of two equal-length vectors: the extreme
// values of the 1/(C-1) covariance.
inline std::pair<double, double> brute_pairing_cov(const std::vector<double>& a, std::vector<double> b) {
  const double C = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / C;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / C;
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), 0);
  double lo = INFINITY, hi = -INFINITY;
  do {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - ma) * (b[perm[c]] - mb);
    s /= C - 1.0;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {lo, hi};
}

} // namespace testsupport
