#include "cdinfer/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <vector>

#include <json.hpp>

#include "cdinfer/errors.hpp"

namespace cdinfer {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

// Minimal RFC 4180 field splitter: double-quoted fields may contain commas
// and doubled quotes; no embedded newlines.
std::vector<std::string> split_csv(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && trim(cur).empty()) {
      quoted = was_quoted = true;
      cur.clear();
    } else if (ch == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  if (quoted) throw SchemaError("line " + std::to_string(lineno) + ": unterminated quoted field");
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

struct CsvTable {
  std::map<std::string, std::size_t> columns;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows; // (line number, fields)
};

CsvTable read_csv(std::istream& in, const std::vector<std::string>& required) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv(line, lineno);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (!t.columns.emplace(fields[i], i).second)
          throw SchemaError("duplicate column '" + fields[i] + "' in header");
      }
      for (const auto& name : required)
        if (!t.columns.count(name)) throw SchemaError("missing column '" + name + "' in header");
      have_header = true;
      continue;
    }
    if (fields.size() != t.columns.size())
      throw SchemaError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                        " fields, found " + std::to_string(fields.size()));
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (!have_header) throw SchemaError("empty CSV input (no header)");
  return t;
}

double parse_real(const std::string& s, std::size_t lineno, const char* column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw SchemaError("line " + std::to_string(lineno) + ": column " + column + ": '" + s + "' is not a number");
  if (!std::isfinite(v))
    throw SchemaError("line " + std::to_string(lineno) + ": column " + column + ": non-finite value");
  return v;
}

std::string parse_id(const std::string& s, std::size_t lineno, const char* column) {
  if (s.empty()) throw SchemaError("line " + std::to_string(lineno) + ": empty " + column);
  return s;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw SchemaError("cannot open '" + path + "'");
  return f;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos && trim(s) == s) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

} // namespace

FinitePopulation read_population_csv(std::istream& in) {
  const auto t = read_csv(in, {"cluster_id", "unit_id", "y0", "y1"});
  const std::size_t ci = t.columns.at("cluster_id"), ui = t.columns.at("unit_id"), y0i = t.columns.at("y0"),
                    y1i = t.columns.at("y1");
  std::map<std::string, Cluster> clusters;
  for (const auto& [lineno, f] : t.rows) {
    const std::string cid = parse_id(f[ci], lineno, "cluster_id");
    auto& cl = clusters[cid];
    cl.id = cid;
    cl.units.push_back(Unit{parse_id(f[ui], lineno, "unit_id"), parse_real(f[y0i], lineno, "y0"),
                            parse_real(f[y1i], lineno, "y1")});
  }
  std::vector<Cluster> list;
  list.reserve(clusters.size());
  for (auto& [id, cl] : clusters) list.push_back(std::move(cl));
  if (list.size() < 2) throw SchemaError("a population needs at least two clusters");
  return FinitePopulation(std::move(list));
}

FinitePopulation read_population_csv_file(const std::string& path) {
  auto f = open_input(path);
  return read_population_csv(f);
}

void write_population_csv(std::ostream& out, const FinitePopulation& pop) {
  out << "cluster_id,unit_id,y0,y1\n";
  for (const auto& cl : pop.clusters())
    for (const auto& u : cl.units)
      out << csv_field(cl.id) << ',' << csv_field(u.id) << ',' << format_real(u.y0) << ',' << format_real(u.y1)
          << '\n';
}

DesignSpec read_design_json(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("design JSON does not parse: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("design JSON must be an object");
  auto count = [](const nlohmann::json& obj, const char* key, const std::string& where) -> std::size_t {
    if (!obj.contains(key)) throw SchemaError(where + ": missing key '" + key + "'");
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw SchemaError(where + ": '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
  };
  DesignSpec d;
  d.C = count(j, "C", "design");
  d.S = count(j, "S", "design");
  d.S1 = count(j, "S1", "design");
  if (!j.contains("clusters") || !j.at("clusters").is_array())
    throw SchemaError("design: 'clusters' must be an array");
  for (const auto& c : j.at("clusters")) {
    if (!c.is_object()) throw SchemaError("design: every cluster entry must be an object");
    if (!c.contains("id") || !c.at("id").is_string()) throw SchemaError("design: cluster entry without a string 'id'");
    ClusterDesign cd;
    cd.id = c.at("id").get<std::string>();
    cd.N = count(c, "N", "cluster " + cd.id);
    cd.n = count(c, "n", "cluster " + cd.id);
    d.clusters.push_back(std::move(cd));
  }
  d.canonicalize();
  return d;
}

DesignSpec read_design_json_file(const std::string& path) {
  auto f = open_input(path);
  return read_design_json(f);
}

void write_design_json(std::ostream& out, const DesignSpec& design) {
  nlohmann::ordered_json j;
  j["C"] = design.C;
  j["S"] = design.S;
  j["S1"] = design.S1;
  j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : design.clusters) j["clusters"].push_back({{"id", c.id}, {"N", c.N}, {"n", c.n}});
  out << j.dump(2) << '\n';
}

ObservedSample read_sample_csv(std::istream& in, const DesignSpec& design) {
  const auto t = read_csv(in, {"cluster_id", "unit_id", "d", "y"});
  const std::size_t ci = t.columns.at("cluster_id"), ui = t.columns.at("unit_id"), di = t.columns.at("d"),
                    yi = t.columns.at("y");
  struct Pending {
    SampledCluster cluster;
    std::set<std::string> unit_ids;
  };
  std::map<std::size_t, Pending> by_index;
  for (const auto& [lineno, f] : t.rows) {
    const std::string cid = parse_id(f[ci], lineno, "cluster_id");
    const std::string& ds = f[di];
    if (ds != "0" && ds != "1")
      throw SchemaError("line " + std::to_string(lineno) + ": column d must be 0 or 1, found '" + ds + "'");
    const bool treated = ds == "1";
    const double y = parse_real(f[yi], lineno, "y");
    const auto idx = design.find(cid);
    if (!idx) throw DesignViolation("cluster " + cid + " (line " + std::to_string(lineno) + ") is not in the design");
    auto [it, inserted] = by_index.try_emplace(*idx);
    Pending& p = it->second;
    if (inserted) {
      p.cluster.id = cid;
      p.cluster.index = *idx;
      p.cluster.treated = treated;
    } else if (p.cluster.treated != treated) {
      throw DesignViolation("treatment must be cluster-level: d varies within cluster " + cid + " (line " +
                            std::to_string(lineno) + ")");
    }
    std::string uid = parse_id(f[ui], lineno, "unit_id");
    if (!p.unit_ids.insert(uid).second)
      throw SchemaError("line " + std::to_string(lineno) + ": duplicate unit " + uid + " in cluster " + cid);
    p.cluster.units.push_back(SampledUnit{std::move(uid), y});
  }

  ObservedSample s;
  std::size_t treated = 0;
  for (auto& [idx, p] : by_index) {
    const auto& cd = design.clusters[idx];
    if (p.cluster.units.size() != cd.n)
      throw DesignViolation("cluster " + cd.id + " has " + std::to_string(p.cluster.units.size()) +
                            " sampled units but the design fixes n_c = " + std::to_string(cd.n));
    std::stable_sort(p.cluster.units.begin(), p.cluster.units.end(),
                     [](const SampledUnit& a, const SampledUnit& b) { return a.id < b.id; });
    treated += p.cluster.treated ? 1 : 0;
    s.clusters.push_back(std::move(p.cluster));
  }
  if (s.clusters.size() != design.S)
    throw DesignViolation("sample holds " + std::to_string(s.clusters.size()) + " clusters but the design fixes S = " +
                          std::to_string(design.S));
  if (treated != design.S1)
    throw DesignViolation("sample holds " + std::to_string(treated) + " treated clusters but the design fixes S1 = " +
                          std::to_string(design.S1));
  return s;
}

ObservedSample read_sample_csv_file(const std::string& path, const DesignSpec& design) {
  auto f = open_input(path);
  return read_sample_csv(f, design);
}

void write_sample_csv(std::ostream& out, const ObservedSample& sample) {
  out << "cluster_id,unit_id,d,y\n";
  for (const auto& sc : sample.clusters)
    for (const auto& u : sc.units)
      out << csv_field(sc.id) << ',' << csv_field(u.id) << ',' << (sc.treated ? 1 : 0) << ',' << format_real(u.y)
          << '\n';
}

} // namespace cdinfer
