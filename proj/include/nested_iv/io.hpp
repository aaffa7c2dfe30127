#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nested_iv/data_model.hpp"

namespace niv {

struct ColumnMapping {
  std::string unit_id = "unit_id";
  std::string z = "z";
  std::string d = "d";
  std::string r = "r";
  // Empty means every remaining column is a covariate.
  std::vector<std::string> covariates;
  // Forces a kind; unlisted columns are numeric when every cell parses as a number.
  std::map<std::string, CovariateKind> kinds;
};

Dataset ingest_units(const std::string& path, const ColumnMapping& mapping = {});
Dataset parse_units(std::istream& in, const ColumnMapping& mapping = {});
void write_units(std::ostream& out, const Dataset& data);

// Design CSV: stratum_id,pair,slot,unit_id. Rows of a stratum keep file order for
// pair positions; slot gives the position within the pair.
PopNivDesign read_design(const std::string& path, const Dataset& data);
PopNivDesign parse_design(std::istream& in, const Dataset& data);
void write_design(std::ostream& out, const PopNivDesign& design);

// Seventeen significant digits, enough to round-trip any double.
std::string format_double(double v);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace niv
