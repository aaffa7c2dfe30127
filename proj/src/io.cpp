#include "nested_iv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "nested_iv/errors.hpp"

namespace niv {

namespace {

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

[[noreturn]] void bad_value(size_t row, const std::string& column, const std::string& why) {
  fail(ErrorCode::UnparseableValue,
       "row " + std::to_string(row) + ", column '" + column + "': " + why);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset ingest_units(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_units(in, mapping);
}

Dataset parse_units(std::istream& in, const ColumnMapping& mapping) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) fail(ErrorCode::EmptyFile, "no header row");
  auto header = split_csv_line(line);

  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::MissingColumn, "missing column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  size_t c_id = column(mapping.unit_id), c_z = column(mapping.z), c_d = column(mapping.d),
         c_r = column(mapping.r);

  std::vector<size_t> cov_cols;
  if (mapping.covariates.empty()) {
    for (size_t i = 0; i < header.size(); ++i)
      if (i != c_id && i != c_z && i != c_d && i != c_r) cov_cols.push_back(i);
  } else {
    for (const auto& n : mapping.covariates) cov_cols.push_back(column(n));
  }

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      fail(ErrorCode::UnparseableValue, "row " + std::to_string(rows.size() + 1) + ": expected " +
                                            std::to_string(header.size()) + " fields, found " +
                                            std::to_string(f.size()));
    rows.push_back(std::move(f));
  }
  if (rows.empty()) fail(ErrorCode::EmptyFile, "no data rows");

  Dataset data;
  for (size_t c : cov_cols) {
    CovariateSchema spec;
    spec.name = header[c];
    auto forced = mapping.kinds.find(spec.name);
    if (forced != mapping.kinds.end()) {
      spec.kind = forced->second;
    } else {
      bool numeric = true;
      for (const auto& r : rows)
        if (!r[c].empty() && !parse_number(r[c])) {
          numeric = false;
          break;
        }
      spec.kind = numeric ? CovariateKind::Numeric : CovariateKind::Categorical;
    }
    if (spec.kind == CovariateKind::Categorical) {
      std::set<std::string> levels;
      for (const auto& r : rows) levels.insert(r[c]);
      spec.levels.assign(levels.begin(), levels.end());
    }
    data.schema.push_back(std::move(spec));
  }

  std::set<std::string> ids;
  data.units.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& f = rows[i];
    size_t row = i + 1;
    ObservedUnit u;
    u.unit_id = f[c_id];
    if (u.unit_id.empty()) bad_value(row, header[c_id], "empty unit id");
    if (!ids.insert(u.unit_id).second) bad_value(row, header[c_id], "duplicate unit id");
    auto z = parse_iv_level(f[c_z]);
    if (!z) bad_value(row, header[c_z], "expected one of 0a, 1a, 0b, 1b");
    u.z = *z;
    if (f[c_d] == "0")
      u.d = 0;
    else if (f[c_d] == "1")
      u.d = 1;
    else
      bad_value(row, header[c_d], "treatment must be 0 or 1");
    auto r = parse_number(f[c_r]);
    if (!r || !std::isfinite(*r)) bad_value(row, header[c_r], "outcome must be a finite number");
    u.r = *r;
    for (size_t k = 0; k < cov_cols.size(); ++k) {
      const auto& cell = f[cov_cols[k]];
      const auto& name = data.schema[k].name;
      if (cell.empty()) bad_value(row, name, "missing covariate");
      if (data.schema[k].kind == CovariateKind::Numeric) {
        auto v = parse_number(cell);
        if (!v || !std::isfinite(*v)) bad_value(row, name, "not a finite number");
        u.covariates.emplace_back(*v);
      } else {
        u.covariates.emplace_back(cell);
      }
    }
    data.units.push_back(std::move(u));
  }
  return data;
}

void write_units(std::ostream& out, const Dataset& data) {
  out << "unit_id,z,d,r";
  for (const auto& c : data.schema) out << ',' << quote(c.name);
  out << '\n';
  for (const auto& u : data.units) {
    out << quote(u.unit_id) << ',' << to_string(u.z) << ',' << u.d << ',' << format_double(u.r);
    for (const auto& v : u.covariates) {
      out << ',';
      if (std::holds_alternative<double>(v))
        out << format_double(std::get<double>(v));
      else
        out << quote(std::get<std::string>(v));
    }
    out << '\n';
  }
}

PopNivDesign read_design(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");
  return parse_design(in, data);
}

PopNivDesign parse_design(std::istream& in, const Dataset& data) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) fail(ErrorCode::EmptyFile, "no header row");
  auto header = split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::MissingColumn, "missing column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  size_t c_s = column("stratum_id"), c_p = column("pair"), c_k = column("slot"),
         c_u = column("unit_id");

  std::unordered_map<std::string, const ObservedUnit*> by_id;
  for (const auto& u : data.units) by_id.emplace(u.unit_id, &u);

  struct Pending {
    std::string id;
    std::vector<char> pair_order;
    std::array<std::array<const ObservedUnit*, 2>, 2> slots{};
  };
  std::vector<Pending> pending;
  std::map<std::string, size_t> index;

  size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) bad_value(row, "*", "wrong field count");
    const auto& sid = f[c_s];
    auto [it, fresh] = index.emplace(sid, pending.size());
    if (fresh) pending.push_back({sid, {}, {}});
    auto& p = pending[it->second];

    std::string pair = f[c_p];
    std::transform(pair.begin(), pair.end(), pair.begin(), ::tolower);
    if (pair != "a" && pair != "b") bad_value(row, "pair", "expected a or b");
    char g = pair[0];
    auto pos = std::find(p.pair_order.begin(), p.pair_order.end(), g);
    if (pos == p.pair_order.end()) {
      p.pair_order.push_back(g);
      pos = p.pair_order.end() - 1;
    }
    int j = static_cast<int>(pos - p.pair_order.begin());
    int k;
    if (f[c_k] == "1")
      k = 0;
    else if (f[c_k] == "2")
      k = 1;
    else
      bad_value(row, "slot", "expected 1 or 2");
    auto u = by_id.find(f[c_u]);
    if (u == by_id.end()) bad_value(row, "unit_id", "unit '" + f[c_u] + "' not in data");
    if (p.slots[j][k]) bad_value(row, "slot", "slot filled twice in stratum " + sid);
    Group want = g == 'a' ? Group::A : Group::B;
    if (u->second->z.group != want)
      fail(ErrorCode::InvalidDesign, "row " + std::to_string(row) + ": unit '" + f[c_u] + "' has z=" +
                                         to_string(u->second->z) + " but sits in pair " + pair);
    p.slots[j][k] = u->second;
  }
  if (pending.empty()) fail(ErrorCode::EmptyFile, "design has no rows");

  PopNivDesign design;
  for (size_t i = 0; i < pending.size(); ++i) {
    const auto& p = pending[i];
    MatchedStratum s;
    s.stratum_id = static_cast<int>(i);
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        if (!p.slots[j][k])
          fail(ErrorCode::InvalidDesign, "stratum " + p.id + " is incomplete");
        s.units[j][k] = *p.slots[j][k];
      }
    design.strata.push_back(std::move(s));
  }
  validate_design(design);
  return design;
}

void write_design(std::ostream& out, const PopNivDesign& design) {
  out << "stratum_id,pair,slot,unit_id\n";
  for (const auto& s : design.strata)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        const auto& u = s.units[j][k];
        out << s.stratum_id << ',' << (u.z.group == Group::A ? 'a' : 'b') << ',' << (k + 1) << ','
            << quote(u.unit_id) << '\n';
      }
}

}  // namespace niv
