#pragma once

#include <iosfwd>
#include <string>

#include "cdinfer/population.hpp"
#include "cdinfer/sampling.hpp"

// File formats.
//   population CSV : cluster_id,unit_id,y0,y1
//   sample CSV     : cluster_id,unit_id,d,y
//   design JSON    : {"C":int,"S":int,"S1":int,"clusters":[{"id":str,"N":int,"n":int},...]}
// Columns are matched by header name; extra columns are ignored. Malformed
// input raises SchemaError with the offending line.
namespace cdinfer {

FinitePopulation read_population_csv(std::istream& in);
FinitePopulation read_population_csv_file(const std::string& path);
void write_population_csv(std::ostream& out, const FinitePopulation& pop);

DesignSpec read_design_json(std::istream& in);
DesignSpec read_design_json_file(const std::string& path);
void write_design_json(std::ostream& out, const DesignSpec& design);

// Reads an observed sample and checks it against the design: every cluster id
// must be in the design, d must be constant within a cluster, the sample must
// hold S clusters (S1 treated) and n_c distinct units per sampled cluster.
// Structural mismatches raise DesignViolation.
ObservedSample read_sample_csv(std::istream& in, const DesignSpec& design);
ObservedSample read_sample_csv_file(const std::string& path, const DesignSpec& design);
// Outcomes are written with 17 significant digits, so a read-back is exact.
void write_sample_csv(std::ostream& out, const ObservedSample& sample);

} // namespace cdinfer
