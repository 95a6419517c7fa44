#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "cdinfer/errors.hpp"
#include "cdinfer/estimators.hpp"
#include "cdinfer/montecarlo.hpp"
#include "cdinfer/sampling.hpp"
#include "cdinfer/variance_oracle.hpp"
#include "support.hpp"

using namespace cdinfer;

namespace {

SimProtocol moment_protocol() {
  SimProtocol p;
  p.C = 400;
  p.S = 200;
  p.S1 = 100;
  p.size_min = p.size_max = 250; // 10^5 units
  return p;
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double n = 0.0;
};

template <class F> Moments unit_moments(const FinitePopulation& pop, F f) {
  Moments m;
  for (const auto& cl : pop.clusters())
    for (const auto& u : cl.units) {
      m.mean += f(u);
      m.n += 1.0;
    }
  m.mean /= m.n;
  for (const auto& cl : pop.clusters())
    for (const auto& u : cl.units) m.var += (f(u) - m.mean) * (f(u) - m.mean);
  m.var /= m.n - 1.0;
  return m;
}

} // namespace

TEST_CASE("DGP parameter tables") {
  const auto sd = DgpSpec::table(3);
  CHECK(sd.noise_sd == 25.0);
  CHECK(sd.alpha_sd == 25.0);
  CHECK(sd.tau_c_sd == 100.0);
  const auto var = DgpSpec::table(2, ParamScale::variance);
  CHECK(var.noise_sd == 5.0);
  CHECK(var.tau_i_sd == 10.0);
  CHECK_THROWS_AS(DgpSpec::table(5), std::invalid_argument);
  CHECK(parse_param_scale("variance") == ParamScale::variance);
  CHECK(parse_regime("r2") == Regime::r2);
  CHECK_THROWS_AS(parse_regime("r3"), std::invalid_argument);
}

TEST_CASE("DGP1 control outcome moments") {
  // Y(0) = X1 + X2 + e: mean 1, variance noise^2 + 2/12.
  for (ParamScale scale : {ParamScale::sd, ParamScale::variance}) {
    const auto dgp = DgpSpec::table(1, scale);
    const auto pop = generate_population(dgp, moment_protocol(), 77);
    const auto m = unit_moments(pop, [](const Unit& u) { return u.y0; });
    const double var = dgp.noise_sd * dgp.noise_sd + 1.0 / 6.0;
    CHECK(m.n == 100000.0);
    CHECK(std::abs(m.mean - 1.0) < 3.0 * std::sqrt(var / m.n));
    CHECK(std::abs(m.var - var) < 3.0 * var * std::sqrt(2.0 / m.n));
    const auto effect = unit_moments(pop, [](const Unit& u) { return u.y1 - u.y0; });
    CHECK(std::abs(effect.mean - 50.0) < 3.0 * std::sqrt(2.0 * dgp.noise_sd * dgp.noise_sd / m.n));
  }
}

TEST_CASE("DGP2 unit effects") {
  const auto dgp = DgpSpec::table(2);
  const auto pop = generate_population(dgp, moment_protocol(), 78);
  const auto effect = unit_moments(pop, [](const Unit& u) { return u.y1 - u.y0; });
  const double var = dgp.tau_i_sd * dgp.tau_i_sd + 2.0 * dgp.noise_sd * dgp.noise_sd;
  CHECK(std::abs(effect.mean - 50.0) < 3.0 * std::sqrt(var / effect.n));
  CHECK(std::abs(effect.var - var) < 3.0 * var * std::sqrt(2.0 / effect.n));
}

TEST_CASE("DGP3 and DGP4 effect structure") {
  SimProtocol p;
  p.C = 30;
  p.size_min = 20;
  p.size_max = 40;
  auto dgp3 = DgpSpec::table(3);
  dgp3.noise_sd = 0.0;
  const auto pop3 = generate_population(dgp3, p, 5);
  // Without noise the effect 2 alpha_c + tau_c is shared within a cluster.
  for (const auto& cl : pop3.clusters()) {
    const double e = cl.units[0].y1 - cl.units[0].y0;
    for (const auto& u : cl.units) CHECK(u.y1 - u.y0 == doctest::Approx(e).epsilon(1e-12));
  }
  auto dgp4 = DgpSpec::table(4);
  dgp4.noise_sd = 0.0;
  const auto pop4 = generate_population(dgp4, p, 5);
  double spread = 0.0;
  for (const auto& cl : pop4.clusters()) {
    const double e = cl.units[0].y1 - cl.units[0].y0;
    for (const auto& u : cl.units) spread = std::max(spread, std::abs(u.y1 - u.y0 - e));
    CHECK(cl.size() >= 20);
    CHECK(cl.size() <= 40);
  }
  CHECK(spread > 0.0);
  // Same seed, same stream layout: DGP3 and DGP4 share control outcomes.
  for (std::size_t c = 0; c < pop3.num_clusters(); ++c) CHECK(pop3.cluster(c).units[0].y0 == pop4.cluster(c).units[0].y0);
}

TEST_CASE("population generation is a function of the seed") {
  SimProtocol p;
  p.C = 10;
  p.size_min = 3;
  p.size_max = 6;
  const auto a = generate_population(DgpSpec::table(4), p, 9);
  const auto b = generate_population(DgpSpec::table(4), p, 9);
  for (std::size_t c = 0; c < 10; ++c) {
    REQUIRE(a.cluster(c).size() == b.cluster(c).size());
    for (std::size_t i = 0; i < a.cluster(c).size(); ++i) CHECK(a.cluster(c).units[i].y1 == b.cluster(c).units[i].y1);
  }
  CHECK(a.cluster(0).id == "c01");
}

TEST_CASE("protocol designs") {
  SimProtocol p;
  p.C = 6;
  p.S = 4;
  p.S1 = 2;
  p.size_min = 3;
  p.size_max = 150;
  const auto pop = generate_population(DgpSpec::table(1), p, 3);
  const auto r1 = protocol_design(pop, p);
  for (std::size_t c = 0; c < 6; ++c) {
    const auto N = pop.cluster(c).size();
    CHECK(r1.clusters[c].n == std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(0.8 * N))));
  }
  p.regime = Regime::r2;
  p.size_min = 100;
  CHECK(protocol_design(generate_population(DgpSpec::table(1), p, 3), p).clusters[0].n == 100);
  p.size_min = 90;
  p.size_max = 99;
  CHECK_THROWS_AS(protocol_design(generate_population(DgpSpec::table(1), p, 3), p), DesignViolation);
  CHECK_THROWS_AS(run_study(DgpSpec::table(1), p), DesignViolation);
}

TEST_CASE("normality diagnostics") {
  SUBCASE("standard normal input") {
    Rng rng(1);
    std::vector<double> z(1000);
    for (auto& v : z) v = rng.normal();
    const auto d = normality_diagnostics(z);
    CHECK(d.n == 1000);
    CHECK(d.ks < 0.05);
    CHECK(std::abs(d.skewness) < 0.2);
    CHECK(std::abs(d.excess_kurtosis) < 0.4);
    CHECK(d.ks_critical == doctest::Approx(1.358 / std::sqrt(1000.0)));
  }
  SUBCASE("too few values") {
    CHECK_THROWS_AS(normality_diagnostics(std::vector<double>(199, 0.0)), std::invalid_argument);
  }
  SUBCASE("one giant cluster") {
    // 19 small clusters with zero outcomes and one with 400 units carrying
    // every effect: whether it is sampled, and in which arm, dominates tau_hat.
    std::vector<std::vector<std::pair<double, double>>> outcomes(19, {{0, 0}, {0, 0}});
    outcomes.push_back(std::vector<std::pair<double, double>>(400, {0.0, 10.0}));
    const auto pop = testsupport::make_population(outcomes);
    std::vector<std::size_t> n(20, 2);
    n[19] = 200;
    const auto d = testsupport::design_for(pop, 10, 5, n);
    CHECK(diagnostics(d).omega > 10.0);
    const double tau = compute_ate(pop), se = std::sqrt(exact_var_feasible(pop, d));
    std::vector<double> z;
    for (std::uint64_t r = 0; r < 1000; ++r) z.push_back((ht_ate(draw_sample(pop, d, derive_seed(4, r)), d) - tau) / se);
    const auto diag = normality_diagnostics(z);
    CHECK(diag.departure);
    CHECK(diag.ks > 0.2);
  }
}

TEST_CASE("studies do not depend on the thread count") {
  SimProtocol p;
  p.C = 24;
  p.S = 16;
  p.S1 = 8;
  p.size_min = 10;
  p.size_max = 14;
  p.reps = 60;
  p.master_seed = 5;
  p.threads = 1;
  const auto serial = run_study(DgpSpec::table(4), p);
  p.threads = 4;
  const auto parallel = run_study(DgpSpec::table(4), p);
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t r = 0; r < serial.records.size(); ++r) {
    CHECK(serial.records[r].tau_hat == parallel.records[r].tau_hat);
    CHECK(serial.records[r].se_h == parallel.records[r].se_h);
    CHECK(serial.records[r].se_lz == parallel.records[r].se_lz);
  }
  CHECK(serial.mc_sd == parallel.mc_sd);
  CHECK(serial.method("upper_bound").coverage == parallel.method("upper_bound").coverage);
  CHECK(serial.failures == 0);
  p.master_seed = 6;
  CHECK(run_study(DgpSpec::table(4), p).records[0].tau_hat != serial.records[0].tau_hat);
}

TEST_CASE("fixed population keeps tau constant") {
  SimProtocol p;
  p.C = 12;
  p.S = 8;
  p.S1 = 4;
  p.size_min = 5;
  p.size_max = 8;
  p.reps = 20;
  p.fixed_population = true;
  const auto res = run_study(DgpSpec::table(3), p);
  for (const auto& r : res.records) CHECK(r.tau == res.records[0].tau);
}

TEST_CASE("DGP1 regime 1 at the protocol scale") {
  SimProtocol p;
  p.threads = 0;
  const auto res = run_study(DgpSpec::table(1), p);
  const double reps = static_cast<double>(res.reps);
  CHECK(res.failures == 0);
  // Oracle-SE intervals have nominal coverage.
  CHECK(std::abs(res.method("exact").coverage - 0.95) <= 0.015);
  // Unbiasedness at scale.
  CHECK(std::abs(res.mean_error) < 3.0 * res.mc_sd / std::sqrt(reps));
  // The exact variance matches the Monte Carlo variance.
  CHECK(std::abs(res.mean_exact_var / (res.mc_sd * res.mc_sd) - 1.0) < 0.10);
  // The upper bound holds on average and covers.
  CHECK(res.method("upper_bound").mean_se >= res.mc_sd - 3.0 * res.mc_sd / std::sqrt(2.0 * (reps - 1.0)));
  CHECK(res.method("upper_bound").coverage >= 0.94);
  REQUIRE(res.normality.has_value());
  CHECK(res.normality->ks < 0.06);
  CHECK(std::abs(res.normality->skewness) < 0.15);
}
