#include "cdinfer/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cdinfer/bound_estimators.hpp"
#include "cdinfer/errors.hpp"
#include "cdinfer/estimators.hpp"
#include "cdinfer/rng.hpp"
#include "cdinfer/sampling.hpp"
#include "cdinfer/variance_oracle.hpp"

namespace cdinfer {

std::string to_string(ParamScale s) { return s == ParamScale::sd ? "sd" : "variance"; }

ParamScale parse_param_scale(const std::string& s) {
  if (s == "sd") return ParamScale::sd;
  if (s == "variance") return ParamScale::variance;
  throw std::invalid_argument("unknown parameter scale '" + s + "' (expected sd or variance)");
}

DgpSpec DgpSpec::table(int id, ParamScale scale) {
  if (id < 1 || id > 4) throw std::invalid_argument("DGP id must be 1, 2, 3 or 4");
  DgpSpec d;
  d.id = id;
  if (scale == ParamScale::sd) {
    d.noise_sd = 25.0;
    d.tau_i_sd = 100.0;
    d.alpha_sd = 25.0;
    d.tau_c_sd = 100.0;
  } else {
    d.noise_sd = 5.0;
    d.tau_i_sd = 10.0;
    d.alpha_sd = 5.0;
    d.tau_c_sd = 10.0;
  }
  return d;
}

std::string to_string(Regime r) { return r == Regime::r1 ? "r1" : "r2"; }

Regime parse_regime(const std::string& s) {
  if (s == "r1" || s == "R1") return Regime::r1;
  if (s == "r2" || s == "R2") return Regime::r2;
  throw std::invalid_argument("unknown regime '" + s + "' (expected r1 or r2)");
}

namespace {

std::string padded_id(char prefix, std::size_t k, std::size_t width) {
  std::string digits = std::to_string(k);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

std::size_t digits_of(std::size_t n) {
  std::size_t w = 1;
  while (n >= 10) {
    n /= 10;
    ++w;
  }
  return w;
}

} // namespace

FinitePopulation generate_population(const DgpSpec& dgp, const SimProtocol& protocol, std::uint64_t seed) {
  if (protocol.size_min == 0 || protocol.size_max < protocol.size_min)
    throw std::invalid_argument("cluster-size law needs 1 <= size_min <= size_max");
  Rng rng(seed);
  const std::size_t C = protocol.C;
  const std::size_t cw = digits_of(C);
  const std::size_t uw = digits_of(protocol.size_max);
  std::vector<Cluster> clusters;
  clusters.reserve(C);
  for (std::size_t c = 0; c < C; ++c) {
    Cluster cl;
    cl.id = padded_id('c', c + 1, cw);
    const std::size_t N = protocol.size_min + rng.below(protocol.size_max - protocol.size_min + 1);
    // Cluster-level effects are always drawn, in a fixed order, so the
    // stream layout does not depend on the DGP.
    const double alpha = rng.normal(dgp.alpha_mean, dgp.alpha_sd);
    const double tau_c = rng.normal(dgp.tau_c_mean, dgp.tau_c_sd);
    const double sigma_c2 = rng.uniform(0.0, dgp.sigma_c2_max);
    cl.units.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      const double x1 = rng.uniform();
      const double x2 = rng.uniform();
      const double e0 = rng.normal(0.0, dgp.noise_sd);
      const double e1 = rng.normal(0.0, dgp.noise_sd);
      const double z = rng.normal();
      const double gx = dgp.gamma[0] * x1 + dgp.gamma[1] * x2;
      Unit u;
      u.id = padded_id('u', i + 1, uw);
      switch (dgp.id) {
      case 1:
        u.y0 = gx + e0;
        u.y1 = dgp.tau + gx + e1;
        break;
      case 2:
        u.y0 = gx + e0;
        u.y1 = dgp.tau_i_mean + dgp.tau_i_sd * z + gx + e1;
        break;
      case 3:
        u.y0 = -alpha + gx + e0;
        u.y1 = alpha + tau_c + gx + e1;
        break;
      case 4:
        u.y0 = -alpha + gx + e0;
        u.y1 = alpha + tau_c + std::sqrt(sigma_c2) * z + gx + e1;
        break;
      default:
        throw std::invalid_argument("DGP id must be 1, 2, 3 or 4");
      }
      cl.units.push_back(std::move(u));
    }
    clusters.push_back(std::move(cl));
  }
  return FinitePopulation(std::move(clusters));
}

DesignSpec protocol_design(const FinitePopulation& pop, const SimProtocol& protocol) {
  std::vector<std::size_t> n;
  n.reserve(pop.num_clusters());
  for (const auto& cl : pop.clusters()) {
    const std::size_t N = cl.size();
    if (protocol.regime == Regime::r1) {
      const auto r = static_cast<std::size_t>(std::llround(protocol.pi * static_cast<double>(N)));
      n.push_back(std::clamp<std::size_t>(r, std::min<std::size_t>(2, N), N));
    } else {
      if (N < protocol.fixed_n)
        throw DesignViolation("regime r2 needs N_c >= " + std::to_string(protocol.fixed_n) + " but cluster " +
                              cl.id + " has N_c = " + std::to_string(N));
      n.push_back(protocol.fixed_n);
    }
  }
  return make_design(pop, protocol.S, protocol.S1, n);
}

NormalityDiagnostics normality_diagnostics(std::vector<double> z) {
  if (z.size() < 200) throw std::invalid_argument("normality diagnostics need at least 200 values");
  NormalityDiagnostics d;
  d.n = z.size();
  const double n = static_cast<double>(z.size());
  double mean = 0.0;
  for (double v : z) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : z) {
    const double e = v - mean;
    m2 += e * e;
    m3 += e * e * e;
    m4 += e * e * e * e;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  d.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  d.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

  std::sort(z.begin(), z.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double phi = 0.5 * std::erfc(-z[i] / std::sqrt(2.0));
    ks = std::max(ks, static_cast<double>(i + 1) / n - phi);
    ks = std::max(ks, phi - static_cast<double>(i) / n);
  }
  d.ks = ks;
  d.ks_critical = 1.358 / std::sqrt(n);
  d.departure = ks > d.ks_critical;
  return d;
}

const MethodSummary& SimResult::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.name == name) return m;
  throw std::out_of_range("no method named '" + name + "'");
}

unsigned threads_from_env() {
  const char* s = std::getenv("THREADS");
  if (s == nullptr || *s == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(s, &end, 10);
  if (end == s || *end != '\0' || v == 0) return 1;
  return static_cast<unsigned>(std::min<unsigned long>(v, 256));
}

namespace {

struct RepOutcome {
  RepRecord record;
  double exact_var = 0.0;
  double se_consv = 0.0;
  bool cover_exact = false, cover_consv = false;
  bool reject_exact = false, reject_consv = false;
};

RepOutcome run_replication(const DgpSpec& dgp, const SimProtocol& protocol, std::size_t rep,
                           const FinitePopulation* fixed_pop) {
  RepOutcome out;
  RepRecord& r = out.record;
  r.rep = rep;
  const std::uint64_t rep_seed = derive_seed(protocol.master_seed, rep);
  FinitePopulation generated;
  if (fixed_pop == nullptr) generated = generate_population(dgp, protocol, derive_seed(rep_seed, 0));
  const FinitePopulation& pop = fixed_pop != nullptr ? *fixed_pop : generated;
  const DesignSpec design = protocol_design(pop, protocol);
  r.tau = compute_ate(pop);
  out.exact_var = exact_var_feasible(pop, design);
  r.se_exact = std::sqrt(std::max(out.exact_var, 0.0));

  const ObservedSample sample = draw_sample(pop, design, derive_seed(rep_seed, 1));
  const auto agg = aggregate(sample, design);
  const auto pr = probabilities(design);
  r.tau_hat = ht_ate(agg, design, pr);
  try {
    const auto bounds = variance_interval(agg, design);
    const auto lz = lz_se(sample, protocol.lz_variant);
    r.se_h = bounds.se_h;
    r.se_consv = std::sqrt(std::max(bounds.var_consv, 0.0));
    r.se_lz = lz.se;
  } catch (const PreconditionError&) {
    r.ok = false;
    return out;
  }
  const double k = protocol.critical;
  auto covers = [&](double se) { return std::abs(r.tau_hat - r.tau) <= k * se; };
  auto rejects = [&](double se) { return std::abs(r.tau_hat) > k * se; };
  r.cover_h = covers(r.se_h);
  r.cover_lz = covers(r.se_lz);
  r.reject_h = rejects(r.se_h);
  r.reject_lz = rejects(r.se_lz);
  out.cover_exact = covers(r.se_exact);
  out.reject_exact = rejects(r.se_exact);
  out.cover_consv = covers(r.se_consv);
  out.reject_consv = rejects(r.se_consv);
  return out;
}

} // namespace

SimResult run_study(const DgpSpec& dgp, const SimProtocol& protocol, ParamScale scale) {
  if (protocol.reps == 0) throw std::invalid_argument("at least one replication is required");
  if (protocol.regime == Regime::r2 && protocol.size_min < protocol.fixed_n)
    throw DesignViolation("regime r2 needs every N_c >= " + std::to_string(protocol.fixed_n) +
                          "; the cluster-size law starts at " + std::to_string(protocol.size_min));
  // Validate the protocol once on a representative population.
  std::optional<FinitePopulation> fixed;
  {
    FinitePopulation probe = generate_population(dgp, protocol, derive_seed(derive_seed(protocol.master_seed, 0), 0));
    const auto v = validate_design(probe, protocol_design(probe, protocol));
    if (!v.ok()) throw DesignViolation(v.message());
    (void)probabilities(protocol_design(probe, protocol));
    if (protocol.fixed_population) fixed = std::move(probe);
  }

  std::vector<RepOutcome> outcomes(protocol.reps);
  const unsigned threads = std::max(1u, protocol.threads == 0 ? threads_from_env() : protocol.threads);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t rep = next.fetch_add(1);
      if (rep >= protocol.reps) return;
      try {
        outcomes[rep] = run_replication(dgp, protocol, rep, fixed ? &*fixed : nullptr);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(protocol.reps);
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Serial aggregation in replication order: independent of the schedule.
  SimResult res;
  res.dgp = dgp;
  res.protocol = protocol;
  res.scale = scale;
  res.reps = protocol.reps;
  struct Acc {
    double se = 0.0;
    std::size_t cover = 0, reject = 0;
  } exact, upper, consv, lz;
  std::vector<double> errors, estimates, z;
  double tau_sum = 0.0, exact_var_sum = 0.0;
  for (const auto& o : outcomes) {
    const RepRecord& r = o.record;
    res.records.push_back(r);
    if (!r.ok) {
      ++res.failures;
      continue;
    }
    tau_sum += r.tau;
    exact_var_sum += o.exact_var;
    errors.push_back(r.tau_hat - r.tau);
    estimates.push_back(r.tau_hat);
    if (r.se_exact > 0.0) z.push_back((r.tau_hat - r.tau) / r.se_exact);
    exact.se += r.se_exact;
    exact.cover += o.cover_exact;
    exact.reject += o.reject_exact;
    upper.se += r.se_h;
    upper.cover += r.cover_h;
    upper.reject += r.reject_h;
    consv.se += r.se_consv;
    consv.cover += o.cover_consv;
    consv.reject += o.reject_consv;
    lz.se += r.se_lz;
    lz.cover += r.cover_lz;
    lz.reject += r.reject_lz;
  }
  const std::size_t m = errors.size();
  if (m > 0) {
    const double md = static_cast<double>(m);
    auto mean_sd = [&](const std::vector<double>& v, double& mean, double& sd) {
      mean = 0.0;
      for (double x : v) mean += x;
      mean /= md;
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      sd = m > 1 ? std::sqrt(ss / (md - 1.0)) : 0.0;
    };
    mean_sd(errors, res.mean_error, res.mc_sd);
    mean_sd(estimates, res.mean_tau_hat, res.sd_tau_hat);
    res.mean_tau = tau_sum / md;
    res.mean_exact_var = exact_var_sum / md;
    auto summary = [&](const char* name, const Acc& a) {
      return MethodSummary{name, a.se / md, static_cast<double>(a.cover) / md, static_cast<double>(a.reject) / md};
    };
    res.methods = {summary("exact", exact), summary("upper_bound", upper), summary("conservative", consv),
                   summary("lz", lz)};
  }
  if (z.size() >= 200) res.normality = normality_diagnostics(z);
  return res;
}

} // namespace cdinfer
