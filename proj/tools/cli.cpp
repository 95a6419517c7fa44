#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cdinfer/bound_estimators.hpp"
#include "cdinfer/design_probability.hpp"
#include "cdinfer/errors.hpp"
#include "cdinfer/estimators.hpp"
#include "cdinfer/io.hpp"
#include "cdinfer/variance_oracle.hpp"

namespace cdinfer::cli {

namespace {

Json interval(double est, double se, double critical) { return Json::array({est - critical * se, est + critical * se}); }

Json design_echo(const DesignSpec& design) {
  const auto pr = probabilities(design);
  Json j;
  j["C"] = design.C;
  j["S"] = design.S;
  j["S1"] = design.S1;
  j["S0"] = design.S0();
  j["p"] = pr.p;
  j["q"] = pr.q;
  j["nbar"] = design.nbar();
  j["units"] = [&] {
    std::size_t n = 0;
    for (const auto& c : design.clusters) n += c.N;
    return n;
  }();
  return j;
}

Json diagnostics_json(const DesignDiagnostics& d) {
  Json j;
  j["omega"] = d.omega;
  j["omega_threshold"] = d.omega_threshold;
  j["beta_hint"] = d.beta_hint ? Json(*d.beta_hint) : Json(nullptr);
  j["warnings"] = d.warnings;
  return j;
}

void require_valid(const FinitePopulation* pop, const DesignSpec& design) {
  const auto v = pop != nullptr ? validate_design(*pop, design) : validate_design(design);
  if (!v.ok()) throw DesignViolation(v.message());
  (void)probabilities(design);
}

void emit(const Json& j, const std::string& out_path, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
  f << text;
}

} // namespace

Json estimate_report(const ObservedSample& sample, const DesignSpec& design, const EstimateOptions& opt) {
  const auto agg = aggregate(sample, design);
  const auto pr = probabilities(design);
  const double tau_hat = ht_ate(agg, design, pr);
  const auto bounds = variance_interval(agg, design);
  const auto lz = lz_se(sample, opt.lz_variant);
  const double se_consv = std::sqrt(std::max(bounds.var_consv, 0.0));
  const auto diag = diagnostics(design, opt.beta);

  Json j;
  j["tau_hat"] = tau_hat;
  j["dm_estimate"] = diff_in_means(sample);
  j["critical"] = opt.critical;
  j["bounds"] = {{"v1_hat", bounds.v1_hat},   {"v0_hat", bounds.v0_hat},       {"sigma_h", bounds.sigma_h},
                 {"sigma_l", bounds.sigma_l}, {"var_h", bounds.var_h},         {"var_l", bounds.var_l},
                 {"var_consv", bounds.var_consv}, {"se_h", bounds.se_h},       {"clamped", bounds.clamped}};
  j["se_consv"] = se_consv;
  j["lz"] = {{"estimate", lz.estimate}, {"se", lz.se}, {"variant", to_string(lz.variant)}};
  j["ci"] = {{"upper_bound", interval(tau_hat, bounds.se_h, opt.critical)},
             {"conservative", interval(tau_hat, se_consv, opt.critical)},
             {"lz", interval(tau_hat, lz.se, opt.critical)}};
  j["clamped"] = {{"var_h", bounds.clamped}, {"var_consv", bounds.var_consv < 0.0}};
  j["design"] = design_echo(design);
  j["diagnostics"] = diagnostics_json(diag);
  return j;
}

Json oracle_report(const FinitePopulation& pop, const DesignSpec& design) {
  const auto vc = variance_components(pop, design);
  const auto fh = true_total_fh_bounds(pop);
  Json j;
  j["tau"] = compute_ate(pop);
  j["var_infeasible"] = exact_var_infeasible(pop, design);
  j["var_feasible"] = exact_var_feasible(pop, design);
  j["var_consv"] = conservative_var(pop, design);
  j["fh_bounds"] = {{"sigma_l", fh.sigma_l}, {"sigma_h", fh.sigma_h}};
  j["components"] = {{"sigma2_1", vc.sigma2[1]},
                     {"sigma2_0", vc.sigma2[0]},
                     {"sigma2_tau", vc.sigma2_tau},
                     {"sigma_10", vc.sigma_10}};
  j["plugin_expectation"] = {{"v1", plugin_arm_expectation(pop, design, Arm::treated)},
                             {"v0", plugin_arm_expectation(pop, design, Arm::control)}};
  j["design"] = design_echo(design);
  return j;
}

namespace {

// Probability-weighted moments over all realizations; an estimator that is
// undefined on some realization is reported as null.
struct Moment {
  std::vector<double> values;
  bool defined = true;

  Json mean_json(const std::vector<double>& prob) const {
    if (!defined) return nullptr;
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += prob[i] * values[i];
    return m;
  }
  Json var_json(const std::vector<double>& prob) const {
    if (!defined) return nullptr;
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += prob[i] * values[i];
    for (std::size_t i = 0; i < values.size(); ++i) v += prob[i] * (values[i] - m) * (values[i] - m);
    return v;
  }
};

template <class F>
void record(Moment& m, F&& f) {
  if (!m.defined) return;
  try {
    m.values.push_back(f());
  } catch (const PreconditionError&) {
    m.defined = false;
  }
}

} // namespace

Json enumerate_report(const FinitePopulation& pop, const DesignSpec& design) {
  const auto pr = probabilities(design);
  std::vector<double> prob;
  Moment tau_hat, tau_bar, v1, v0, consv;
  for_each_realization(pop, design, [&](const ObservedSample& s, double p) {
    prob.push_back(p);
    const auto agg = aggregate(s, design);
    tau_hat.values.push_back(ht_ate(agg, design, pr));
    tau_bar.values.push_back(infeasible_ate(pop, design, s));
    record(v1, [&] { return vhat_arm(agg, design, Arm::treated); });
    record(v0, [&] { return vhat_arm(agg, design, Arm::control); });
    record(consv, [&] { return conservative_estimate(agg, design); });
  });
  double total = 0.0;
  for (double p : prob) total += p;
  Json j;
  j["realizations"] = prob.size();
  j["realization_count"] = realization_count(design);
  j["probability_sum"] = total;
  j["tau"] = compute_ate(pop);
  j["mean_tau_hat"] = tau_hat.mean_json(prob);
  j["var_tau_hat"] = tau_hat.var_json(prob);
  j["mean_tau_bar"] = tau_bar.mean_json(prob);
  j["var_tau_bar"] = tau_bar.var_json(prob);
  j["mean_v1_hat"] = v1.mean_json(prob);
  j["mean_v0_hat"] = v0.mean_json(prob);
  j["mean_var_consv_hat"] = consv.mean_json(prob);
  return j;
}

Json sim_result_json(const SimResult& r) {
  Json j;
  Json dgp;
  dgp["id"] = r.dgp.id;
  dgp["scale"] = to_string(r.scale);
  dgp["noise_sd"] = r.dgp.noise_sd;
  dgp["tau"] = r.dgp.tau;
  dgp["tau_i"] = {{"mean", r.dgp.tau_i_mean}, {"sd", r.dgp.tau_i_sd}};
  dgp["alpha_c"] = {{"mean", r.dgp.alpha_mean}, {"sd", r.dgp.alpha_sd}};
  dgp["tau_c"] = {{"mean", r.dgp.tau_c_mean}, {"sd", r.dgp.tau_c_sd}};
  dgp["sigma_c2_max"] = r.dgp.sigma_c2_max;
  j["dgp"] = dgp;
  const auto& p = r.protocol;
  j["protocol"] = {{"C", p.C},
                   {"S", p.S},
                   {"S1", p.S1},
                   {"regime", to_string(p.regime)},
                   {"pi", p.pi},
                   {"fixed_n", p.fixed_n},
                   {"reps", p.reps},
                   {"seed", p.master_seed},
                   {"cluster_size", {p.size_min, p.size_max}},
                   {"fixed_population", p.fixed_population},
                   {"lz_variant", to_string(p.lz_variant)},
                   {"critical", p.critical}};
  j["reps"] = r.reps;
  j["failures"] = r.failures;
  j["mean_tau"] = r.mean_tau;
  j["mean_tau_hat"] = r.mean_tau_hat;
  j["mean_error"] = r.mean_error;
  j["mc_sd"] = r.mc_sd;
  j["sd_tau_hat"] = r.sd_tau_hat;
  j["mean_exact_var"] = r.mean_exact_var;
  Json methods = Json::object();
  for (const auto& m : r.methods)
    methods[m.name] = {{"mean_estimate", r.mean_tau_hat},
                       {"mc_sd", r.mc_sd},
                       {"mean_se", m.mean_se},
                       {"coverage", m.coverage},
                       {"power", m.power}};
  j["methods"] = methods;
  if (r.normality) {
    const auto& n = *r.normality;
    j["normality"] = {{"n", n.n},
                      {"skewness", n.skewness},
                      {"excess_kurtosis", n.excess_kurtosis},
                      {"ks", n.ks},
                      {"ks_critical", n.ks_critical},
                      {"departure", n.departure}};
  } else {
    j["normality"] = nullptr;
  }
  return j;
}

void write_records_csv(std::ostream& out, const std::vector<RepRecord>& records) {
  out << "rep,tau,tau_hat,se_h,se_consv,se_lz,se_exact,cover_h,cover_lz,reject_h,reject_lz\n";
  char buf[512];
  for (const auto& r : records) {
    if (!r.ok) continue;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%d\n", r.rep, r.tau, r.tau_hat,
                  r.se_h, r.se_consv, r.se_lz, r.se_exact, r.cover_h ? 1 : 0, r.cover_lz ? 1 : 0, r.reject_h ? 1 : 0,
                  r.reject_lz ? 1 : 0);
    out << buf;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design-based inference for two-stage cluster randomized trials", "cdinfer"};
  app.require_subcommand(1);

  // estimate
  std::string data_path, design_path, population_path, out_path, lz_name = "cr1";
  EstimateOptions eopt;
  double beta = 0.0;
  auto* est = app.add_subcommand("estimate", "Point estimate, variance bounds and CIs from an observed sample");
  est->add_option("--data", data_path, "Sample CSV (cluster_id,unit_id,d,y)")->required();
  est->add_option("--design", design_path, "Design JSON")->required();
  est->add_option("--critical", eopt.critical, "Critical value for the CIs")->capture_default_str();
  est->add_option("--lz-variant", lz_name, "Liang-Zeger small-sample variant")
      ->check(CLI::IsMember({"cr0", "cr1"}))
      ->capture_default_str();
  auto* beta_opt = est->add_option("--beta", beta, "Asymptotic sampling-rate hint for the cluster-size advisory");
  est->add_option("--out", out_path, "Write the report here instead of stdout");

  // simulate
  SimProtocol proto;
  int dgp_id = 1;
  std::string regime_name = "r1", scale_name = "sd", records_path;
  std::uint64_t seed = proto.master_seed;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo coverage and power study");
  sim->add_option("--dgp", dgp_id, "Data generating process")->check(CLI::IsMember({1, 2, 3, 4}))->capture_default_str();
  sim->add_option("--regime", regime_name, "Second-stage regime")
      ->check(CLI::IsMember({"r1", "r2"}))
      ->capture_default_str();
  sim->add_option("--reps", proto.reps, "Replications")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--seed", seed, "Master seed (decimal 64-bit unsigned)")->capture_default_str();
  sim->add_option("--clusters", proto.C, "Population clusters C")->capture_default_str();
  sim->add_option("--sampled", proto.S, "Sampled clusters S")->capture_default_str();
  sim->add_option("--treated", proto.S1, "Treated clusters S1")->capture_default_str();
  sim->add_option("--size-min", proto.size_min, "Smallest cluster size")->capture_default_str();
  sim->add_option("--size-max", proto.size_max, "Largest cluster size")->capture_default_str();
  sim->add_option("--scale", scale_name, "Reading of the DGP dispersion parameters")
      ->check(CLI::IsMember({"sd", "variance"}))
      ->capture_default_str();
  sim->add_flag("--fixed-population", proto.fixed_population, "Reuse one population for every replication");
  sim->add_option("--lz-variant", lz_name, "Liang-Zeger small-sample variant")
      ->check(CLI::IsMember({"cr0", "cr1"}))
      ->capture_default_str();
  sim->add_option("--critical", proto.critical, "Critical value")->capture_default_str();
  sim->add_option("--records", records_path, "Also write per-replication records to this CSV");
  sim->add_option("--out", out_path, "Write the result here instead of stdout");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Exact design variances from a potential-outcome table");
  orc->add_option("--population", population_path, "Population CSV (cluster_id,unit_id,y0,y1)")->required();
  orc->add_option("--design", design_path, "Design JSON")->required();
  orc->add_option("--out", out_path, "Write the report here instead of stdout");

  // enumerate
  auto* enu = app.add_subcommand("enumerate", "Exact estimator moments by enumerating every realization");
  enu->add_option("--population", population_path, "Population CSV (cluster_id,unit_id,y0,y1)")->required();
  enu->add_option("--design", design_path, "Design JSON")->required();
  enu->add_option("--out", out_path, "Write the report here instead of stdout");

  // sample
  std::string design_out;
  auto* smp = app.add_subcommand("sample", "Draw one realization of the design and export it");
  smp->add_option("--population", population_path, "Population CSV (cluster_id,unit_id,y0,y1)")->required();
  smp->add_option("--design", design_path, "Design JSON")->required();
  smp->add_option("--seed", seed, "Seed (decimal 64-bit unsigned)")->required();
  smp->add_option("--out", out_path, "Sample CSV (stdout if omitted)");
  smp->add_option("--design-out", design_out, "Also write the design JSON sidecar here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return kSchema;
  }

  try {
    if (*est) {
      eopt.lz_variant = parse_lz_variant(lz_name);
      if (*beta_opt) eopt.beta = beta;
      const auto design = read_design_json_file(design_path);
      require_valid(nullptr, design);
      const auto sample = read_sample_csv_file(data_path, design);
      const auto report = estimate_report(sample, design, eopt);
      for (const auto& w : report["diagnostics"]["warnings"]) err << "warning: " << w.get<std::string>() << '\n';
      if (report["bounds"]["clamped"].get<bool>())
        err << "warning: estimated upper-bound variance is negative; se_h clamped to 0\n";
      emit(report, out_path, out);
    } else if (*sim) {
      proto.regime = parse_regime(regime_name);
      proto.lz_variant = parse_lz_variant(lz_name);
      proto.master_seed = seed;
      const auto scale = parse_param_scale(scale_name);
      const auto result = run_study(DgpSpec::table(dgp_id, scale), proto, scale);
      if (result.failures > 0)
        err << "warning: " << result.failures << " replications failed an estimator precondition\n";
      emit(sim_result_json(result), out_path, out);
      if (!records_path.empty()) {
        std::ofstream f(records_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + records_path + "'");
        write_records_csv(f, result.records);
      }
    } else if (*orc) {
      const auto pop = read_population_csv_file(population_path);
      const auto design = read_design_json_file(design_path);
      require_valid(&pop, design);
      emit(oracle_report(pop, design), out_path, out);
    } else if (*enu) {
      const auto pop = read_population_csv_file(population_path);
      const auto design = read_design_json_file(design_path);
      require_valid(&pop, design);
      emit(enumerate_report(pop, design), out_path, out);
    } else if (*smp) {
      const auto pop = read_population_csv_file(population_path);
      const auto design = read_design_json_file(design_path);
      require_valid(&pop, design);
      const auto sample = draw_sample(pop, design, seed);
      if (out_path.empty()) {
        write_sample_csv(out, sample);
      } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + out_path + "'");
        write_sample_csv(f, sample);
      }
      if (!design_out.empty()) {
        std::ofstream f(design_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + design_out + "'");
        write_design_json(f, design);
      }
    }
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const DesignViolation& e) {
    err << "design violation: " << e.what() << '\n';
    return kDesign;
  } catch (const PreconditionError& e) {
    err << "estimator precondition failed: " << e.what() << '\n';
    return kPrecondition;
  } catch (const TooLarge& e) {
    err << "too large: " << e.what() << " (realization count " << e.count() << ")\n";
    return kTooLarge;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

} // namespace cdinfer::cli
