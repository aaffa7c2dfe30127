#include "nested_iv/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "nested_iv/errors.hpp"

namespace niv {

std::optional<IvLevel> parse_iv_level(std::string_view token) {
  if (token.size() != 2) return std::nullopt;
  IvLevel z;
  if (token[0] == '0')
    z.arm = Arm::Control;
  else if (token[0] == '1')
    z.arm = Arm::Treated;
  else
    return std::nullopt;
  char g = static_cast<char>(std::tolower(static_cast<unsigned char>(token[1])));
  if (g == 'a')
    z.group = Group::A;
  else if (g == 'b')
    z.group = Group::B;
  else
    return std::nullopt;
  return z;
}

std::string to_string(IvLevel z) {
  std::string s;
  s += z.treated() ? '1' : '0';
  s += z.group == Group::A ? 'a' : 'b';
  return s;
}

int arm_index(IvLevel z) {
  int base = z.group == Group::A ? 0 : 2;
  return base + (z.treated() ? 0 : 1);
}

IvLevel arm_level(int index) {
  static const IvLevel levels[4] = {kTreatedA, kControlA, kTreatedB, kControlB};
  return levels[index];
}

int Dataset::covariate_index(std::string_view name) const {
  for (size_t i = 0; i < schema.size(); ++i)
    if (schema[i].name == name) return static_cast<int>(i);
  return -1;
}

const ObservedUnit* Dataset::find(std::string_view unit_id) const {
  for (const auto& u : units)
    if (u.unit_id == unit_id) return &u;
  return nullptr;
}

std::vector<std::vector<double>> encode_covariates(const std::vector<CovariateSchema>& schema,
                                                   const std::vector<ObservedUnit>& units,
                                                   const std::vector<std::string>& names,
                                                   CategoricalEncoding encoding) {
  std::vector<int> cols;
  if (names.empty()) {
    for (size_t i = 0; i < schema.size(); ++i) cols.push_back(static_cast<int>(i));
  } else {
    for (const auto& n : names) {
      auto it = std::find_if(schema.begin(), schema.end(),
                             [&](const CovariateSchema& c) { return c.name == n; });
      if (it == schema.end()) fail(ErrorCode::SchemaMismatch, "unknown covariate '" + n + "'");
      cols.push_back(static_cast<int>(it - schema.begin()));
    }
  }

  std::vector<std::vector<double>> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    if (u.covariates.size() != schema.size())
      fail(ErrorCode::SchemaMismatch, "unit '" + u.unit_id + "' has " +
                                          std::to_string(u.covariates.size()) +
                                          " covariates, schema has " +
                                          std::to_string(schema.size()));
    std::vector<double> row;
    for (int c : cols) {
      const auto& spec = schema[c];
      const auto& v = u.covariates[c];
      if (spec.kind == CovariateKind::Numeric) {
        if (!std::holds_alternative<double>(v))
          fail(ErrorCode::SchemaMismatch, "covariate '" + spec.name + "' is not numeric");
        row.push_back(std::get<double>(v));
        continue;
      }
      if (!std::holds_alternative<std::string>(v))
        fail(ErrorCode::SchemaMismatch, "covariate '" + spec.name + "' is not categorical");
      const auto& s = std::get<std::string>(v);
      auto it = std::lower_bound(spec.levels.begin(), spec.levels.end(), s);
      if (it == spec.levels.end() || *it != s)
        fail(ErrorCode::SchemaMismatch, "level '" + s + "' not in schema of '" + spec.name + "'");
      auto level = static_cast<size_t>(it - spec.levels.begin());
      if (encoding == CategoricalEncoding::Integer) {
        row.push_back(static_cast<double>(level));
      } else {
        for (size_t l = 0; l < spec.levels.size(); ++l) row.push_back(l == level ? 1.0 : 0.0);
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

int MatchedStratum::pair_of(Group g) const {
  return units[0][0].z.group == g ? 0 : 1;
}

const ObservedUnit& MatchedStratum::treated(Group g) const {
  const auto& p = units[pair_of(g)];
  return p[0].z.treated() ? p[0] : p[1];
}

const ObservedUnit& MatchedStratum::control(Group g) const {
  const auto& p = units[pair_of(g)];
  return p[0].z.treated() ? p[1] : p[0];
}

std::array<double, 4> MatchedStratum::auxiliary_z(Group g) const {
  std::array<double, 4> out{};
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      const auto& z = units[j][k].z;
      out[2 * j + k] = z.group != g ? 0.5 : (z.treated() ? 1.0 : 0.0);
    }
  return out;
}

std::array<double, 4> auxiliary_z(const MatchedStratum& s, Group g) { return s.auxiliary_z(g); }

void validate_stratum(const MatchedStratum& s) {
  auto where = "stratum " + std::to_string(s.stratum_id) + ": ";
  std::set<std::string> ids;
  for (int j = 0; j < 2; ++j) {
    const auto& p = s.units[j];
    if (p[0].z.group != p[1].z.group)
      fail(ErrorCode::InvalidDesign, where + "pair mixes IV groups");
    if (p[0].z.arm == p[1].z.arm)
      fail(ErrorCode::InvalidDesign, where + "pair needs one treated and one control unit");
    ids.insert(p[0].unit_id);
    ids.insert(p[1].unit_id);
  }
  if (s.units[0][0].z.group == s.units[1][0].z.group)
    fail(ErrorCode::InvalidDesign, where + "both pairs have the same IV group");
  if (ids.size() != 4) fail(ErrorCode::InvalidDesign, where + "unit ids repeat");
}

void validate_design(const PopNivDesign& design) {
  if (design.strata.empty()) fail(ErrorCode::InvalidDesign, "design has no strata");
  std::set<std::string> seen;
  for (const auto& s : design.strata) {
    validate_stratum(s);
    for (const auto& p : s.units)
      for (const auto& u : p)
        if (!seen.insert(u.unit_id).second)
          fail(ErrorCode::InvalidDesign, "unit '" + u.unit_id + "' appears in two strata");
  }
}

const char* to_string(PrincipalKind k) {
  switch (k) {
    case PrincipalKind::SW: return "SW";
    case PrincipalKind::ACO: return "ACO";
    case PrincipalKind::AT_NT: return "AT-NT";
    case PrincipalKind::AAT: return "AAT";
    case PrincipalKind::NT_AT: return "NT-AT";
    case PrincipalKind::ANT: return "ANT";
  }
  return "?";
}

int DPot::at(IvLevel z) const {
  if (z.group == Group::A) return z.treated() ? t_a : c_a;
  return z.treated() ? t_b : c_b;
}

DPot d_pattern(PrincipalKind kind, SwitcherOrigin origin) {
  switch (kind) {
    case PrincipalKind::SW:
      if (origin == SwitcherOrigin::FromAT) return {1, 1, 0, 1};
      if (origin == SwitcherOrigin::FromNT) return {0, 0, 0, 1};
      fail(ErrorCode::InvalidArgument, "switchers need an origin (FromNT or FromAT)");
    case PrincipalKind::ACO: return {0, 1, 0, 1};
    case PrincipalKind::AT_NT: return {1, 1, 0, 0};
    case PrincipalKind::AAT: return {1, 1, 1, 1};
    case PrincipalKind::NT_AT: return {0, 0, 1, 1};
    case PrincipalKind::ANT: return {0, 0, 0, 0};
  }
  fail(ErrorCode::Internal, "unknown principal stratum");
}

std::vector<DPot> all_d_patterns() {
  return {d_pattern(PrincipalKind::SW, SwitcherOrigin::FromNT),
          d_pattern(PrincipalKind::SW, SwitcherOrigin::FromAT),
          d_pattern(PrincipalKind::ACO),
          d_pattern(PrincipalKind::AT_NT),
          d_pattern(PrincipalKind::AAT),
          d_pattern(PrincipalKind::NT_AT),
          d_pattern(PrincipalKind::ANT)};
}

LatentUnit make_latent(PrincipalKind kind, SwitcherOrigin origin, double r0, double r1) {
  LatentUnit u;
  u.kind = kind;
  u.origin = kind == PrincipalKind::SW ? origin : SwitcherOrigin::None;
  u.d_pot = d_pattern(kind, u.origin);
  u.r0 = r0;
  u.r1 = r1;
  return u;
}

}  // namespace niv
