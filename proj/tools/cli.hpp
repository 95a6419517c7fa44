#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cdinfer/baseline_lz.hpp"
#include "cdinfer/montecarlo.hpp"
#include "cdinfer/population.hpp"
#include "cdinfer/sampling.hpp"

namespace cdinfer::cli {

using Json = nlohmann::ordered_json;

// Exit codes.
constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kSchema = 2;
constexpr int kDesign = 3;
constexpr int kPrecondition = 4;
constexpr int kTooLarge = 5;

struct EstimateOptions {
  double critical = 1.96;
  LzVariant lz_variant = LzVariant::cr1;
  std::optional<double> beta;
};

// The `estimate` report for an observed sample under a validated design.
Json estimate_report(const ObservedSample& sample, const DesignSpec& design, const EstimateOptions& opt = {});

// Exact design quantities from a complete potential-outcome table.
Json oracle_report(const FinitePopulation& pop, const DesignSpec& design);

// Exact design moments of every estimator by exhaustive enumeration.
Json enumerate_report(const FinitePopulation& pop, const DesignSpec& design);

Json sim_result_json(const SimResult& r);
void write_records_csv(std::ostream& out, const std::vector<RepRecord>& records);

// Runs one command line (args excludes the program name). Reports go to
// `out`, warnings and errors to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace cdinfer::cli
