#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdinfer/baseline_lz.hpp"
#include "cdinfer/population.hpp"

namespace cdinfer {

// How the second argument of the N(mean, .) laws in the DGP table is read.
//   sd       : as a standard deviation (noise sd 25, tau_i sd 100, alpha_c sd 25,
//              tau_c sd 100). The default.
//   variance : as a variance (noise sd 5, tau_i sd 10, alpha_c sd 5, tau_c sd 10).
enum class ParamScale { sd, variance };

std::string to_string(ParamScale s);
ParamScale parse_param_scale(const std::string& s);

struct DgpSpec {
  int id = 1; // 1..4
  double noise_sd = 25.0;
  double tau = 50.0;            // DGP 1 constant effect
  double tau_i_mean = 50.0;     // DGP 2 unit effects
  double tau_i_sd = 100.0;
  double alpha_mean = 5.0;      // DGP 3/4 cluster intercept
  double alpha_sd = 25.0;
  double tau_c_mean = 20.0;     // DGP 3/4 cluster effect
  double tau_c_sd = 100.0;
  double sigma_c2_max = 4.0;    // DGP 4: within-cluster effect variance ~ U[0, max]
  double gamma[2] = {1.0, 1.0}; // covariates ~ U[0,1]^2

  static DgpSpec table(int id, ParamScale scale = ParamScale::sd);
};

enum class Regime { r1, r2 };

std::string to_string(Regime r);
Regime parse_regime(const std::string& s);

struct SimProtocol {
  std::size_t C = 120;
  std::size_t S = 80;
  std::size_t S1 = 40;
  Regime regime = Regime::r1;
  double pi = 0.8;            // R1 sampling fraction
  std::size_t fixed_n = 100;  // R2 units per cluster
  std::size_t reps = 1000;
  std::uint64_t master_seed = 20240601;
  std::size_t size_min = 170; // N_c ~ uniform integer on [size_min, size_max]
  std::size_t size_max = 174;
  bool fixed_population = false; // one population for all replications
  unsigned threads = 0;          // 0: THREADS environment variable, else 1
  LzVariant lz_variant = LzVariant::cr1;
  double critical = 1.96;
};

// Cluster sizes, covariates, effects and both potential outcomes; a pure
// function of (dgp, protocol sizes, seed).
FinitePopulation generate_population(const DgpSpec& dgp, const SimProtocol& protocol, std::uint64_t seed);

// R1: n_c = round(pi N_c) clamped to [2, N_c]. R2: n_c = fixed_n, which
// must not exceed N_c (DesignViolation otherwise).
DesignSpec protocol_design(const FinitePopulation& pop, const SimProtocol& protocol);

struct NormalityDiagnostics {
  std::size_t n = 0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double ks = 0.0;        // sup |F_n - Phi|
  double ks_critical = 0.0; // asymptotic 5% critical value 1.358 / sqrt(n)
  bool departure = false;   // ks > ks_critical
};

// Requires at least 200 values.
NormalityDiagnostics normality_diagnostics(std::vector<double> z);

struct RepRecord {
  std::size_t rep = 0;
  double tau = 0.0;
  double tau_hat = 0.0;
  double se_h = 0.0;
  double se_consv = 0.0;
  double se_lz = 0.0;
  double se_exact = 0.0;
  bool cover_h = false;
  bool cover_lz = false;
  bool reject_h = false;
  bool reject_lz = false;
  bool ok = true; // false when an estimator precondition failed
};

struct MethodSummary {
  std::string name;
  double mean_se = 0.0;
  double coverage = 0.0;
  double power = 0.0;
};

struct SimResult {
  DgpSpec dgp;
  SimProtocol protocol;
  ParamScale scale = ParamScale::sd;
  std::size_t reps = 0;
  std::size_t failures = 0;
  double mean_tau = 0.0;
  double mean_tau_hat = 0.0;
  double mean_error = 0.0; // mean of tau_hat - tau
  double mc_sd = 0.0;      // sd of tau_hat - tau across replications
  double sd_tau_hat = 0.0; // sd of tau_hat itself
  double mean_exact_var = 0.0;
  std::vector<MethodSummary> methods; // exact, upper_bound, conservative, lz
  std::optional<NormalityDiagnostics> normality;
  std::vector<RepRecord> records;

  const MethodSummary& method(const std::string& name) const;
};

// Runs protocol.reps replications. Each draws its own population (unless
// fixed_population) and sample from seeds derived from the master seed and the
// replication index, so results do not depend on the thread count.
SimResult run_study(const DgpSpec& dgp, const SimProtocol& protocol, ParamScale scale = ParamScale::sd);

// Thread count from the THREADS environment variable (default 1).
unsigned threads_from_env();

} // namespace cdinfer
