#include <algorithm>
#include <cmath>
#include <set>

#include "nested_iv/errors.hpp"
#include "nested_iv/matching.hpp"
#include "nested_iv/stats.hpp"

namespace niv {

namespace {

void summarize_numeric(BalanceRow& row, const std::array<std::vector<double>, 4>& values) {
  std::vector<std::vector<double>> groups(values.begin(), values.end());
  for (int a = 0; a < 4; ++a) {
    auto& s = row.arms[a];
    s.n = static_cast<int>(values[a].size());
    if (values[a].empty()) continue;
    double m = 0;
    for (double x : values[a]) m += x;
    m /= s.n;
    double ss = 0;
    for (double x : values[a]) ss += (x - m) * (x - m);
    s.mean = m;
    s.sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
  }
  auto res = one_way_anova(groups);
  row.statistic = res.f;
  row.p_value = res.degenerate ? 1.0 : res.p_value;
  row.degenerate = res.degenerate;
}

void summarize_categorical(BalanceRow& row, const std::array<std::vector<std::string>, 4>& values) {
  std::set<std::string> levels;
  for (const auto& v : values) levels.insert(v.begin(), v.end());
  row.levels.assign(levels.begin(), levels.end());
  std::vector<std::vector<double>> table(4, std::vector<double>(row.levels.size(), 0.0));
  for (int a = 0; a < 4; ++a) {
    for (const auto& x : values[a]) {
      auto it = std::lower_bound(row.levels.begin(), row.levels.end(), x);
      table[a][it - row.levels.begin()] += 1;
    }
    row.arms[a].counts = table[a];
    row.arms[a].n = static_cast<int>(values[a].size());
  }
  auto res = chi_square_independence(table);
  row.statistic = res.statistic;
  row.p_value = res.degenerate ? 1.0 : res.p_value;
  row.degenerate = res.degenerate;
}

}  // namespace

BalanceReport balance_report(const PopNivDesign& design, const std::vector<CovariateSchema>& schema,
                             const std::vector<std::string>& covariates) {
  if (design.size() < 2) fail(ErrorCode::TooFewStrata, "balance needs at least 2 strata");
  std::vector<int> cols;
  if (covariates.empty()) {
    for (size_t i = 0; i < schema.size(); ++i) cols.push_back(static_cast<int>(i));
  } else {
    for (const auto& name : covariates) {
      int idx = -1;
      for (size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == name) idx = static_cast<int>(i);
      if (idx < 0) fail(ErrorCode::SchemaMismatch, "unknown covariate '" + name + "'");
      cols.push_back(idx);
    }
  }

  std::array<std::vector<const ObservedUnit*>, 4> arms;
  for (const auto& s : design.strata)
    for (const auto& p : s.units)
      for (const auto& u : p) arms[arm_index(u.z)].push_back(&u);

  BalanceReport report;
  for (int c : cols) {
    BalanceRow row;
    row.name = schema[c].name;
    row.categorical = schema[c].kind == CovariateKind::Categorical;
    if (row.categorical) {
      std::array<std::vector<std::string>, 4> v;
      for (int a = 0; a < 4; ++a)
        for (const auto* u : arms[a]) {
          if (u->covariates.size() != schema.size())
            fail(ErrorCode::SchemaMismatch, "unit '" + u->unit_id + "' does not match the schema");
          v[a].push_back(std::get<std::string>(u->covariates[c]));
        }
      summarize_categorical(row, v);
    } else {
      std::array<std::vector<double>, 4> v;
      for (int a = 0; a < 4; ++a)
        for (const auto* u : arms[a]) {
          if (u->covariates.size() != schema.size())
            fail(ErrorCode::SchemaMismatch, "unit '" + u->unit_id + "' does not match the schema");
          v[a].push_back(std::get<double>(u->covariates[c]));
        }
      summarize_numeric(row, v);
    }
    report.rows.push_back(std::move(row));
  }

  BalanceRow uptake;
  uptake.name = "treatment_uptake";
  uptake.categorical = true;
  std::array<std::vector<std::string>, 4> d;
  for (int a = 0; a < 4; ++a)
    for (const auto* u : arms[a]) d[a].push_back(u->d ? "1" : "0");
  summarize_categorical(uptake, d);
  report.rows.push_back(std::move(uptake));
  return report;
}

}  // namespace niv
