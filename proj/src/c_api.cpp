#include "nested_iv/nested_iv.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nested_iv/errors.hpp"
#include "nested_iv/inference.hpp"
#include "nested_iv/io.hpp"
#include "nested_iv/matching.hpp"
#include "nested_iv/rng.hpp"
#include "nested_iv/sensitivity.hpp"
#include "nested_iv/simulation.hpp"

struct niv_dataset {
  niv::Dataset data;
};

struct niv_design {
  niv::PopNivDesign design;
};

struct niv_table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string csv;

  void render() {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
      for (size_t j = 0; j < cells.size(); ++j) {
        if (j) os << ',';
        const auto& c = cells[j];
        if (c.find_first_of(",\"\n") != std::string::npos) {
          os << '"';
          for (char ch : c) os << (ch == '"' ? "\"\"" : std::string(1, ch));
          os << '"';
        } else {
          os << c;
        }
      }
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    csv = os.str();
  }
};

namespace {

thread_local std::string last_error;

template <class F>
niv_status_t try_(F&& f) {
  try {
    last_error.clear();
    f();
    return NIV_OK;
  } catch (const niv::Error& e) {
    last_error = e.what();
    return static_cast<niv_status_t>(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown failure";
  }
  return NIV_INTERNAL;
}

template <class T>
T& deref(T* p, const char* what) {
  if (p == nullptr) niv::fail(niv::ErrorCode::InvalidArgument, std::string("null ") + what);
  return *p;
}

std::string text(const char* p, const char* what) {
  if (p == nullptr) niv::fail(niv::ErrorCode::InvalidArgument, std::string("null ") + what);
  return p;
}

std::string num(double v) { return niv::format_double(v); }

niv::Alternative alternative(niv_alternative_t a) {
  switch (a) {
    case NIV_TWO_SIDED: return niv::Alternative::TwoSided;
    case NIV_GREATER: return niv::Alternative::Greater;
    case NIV_LESS: return niv::Alternative::Less;
  }
  niv::fail(niv::ErrorCode::InvalidArgument, "unknown alternative");
}

niv::Target ratio_target(niv_target_t t) {
  if (t == NIV_TARGET_ACO) return niv::Target::ACO;
  if (t == NIV_TARGET_SW) return niv::Target::SW;
  niv::fail(niv::ErrorCode::InvalidArgument, "target must be aco or sw");
}

void fill_ci(const niv::ConfidenceInterval& ci, niv_estimate_t& out) {
  out.lower = ci.lower;
  out.upper = ci.upper;
  out.level = ci.level;
  out.shape = static_cast<niv_shape_t>(ci.shape);
  out.method = static_cast<niv_method_t>(ci.method);
  out.n_components = static_cast<int>(std::min<size_t>(ci.components.size(), 2));
  for (int k = 0; k < out.n_components; ++k) {
    out.component_lower[k] = ci.components[k].first;
    out.component_upper[k] = ci.components[k].second;
  }
}

void fill_test(const niv::TestResult& t, niv_estimate_t& out) {
  out.statistic = t.statistic;
  out.test_se = t.se;
  out.z_score = t.z_score;
  out.p_value = t.p_value;
}

niv::ExperimentConfig to_config(const niv_experiment_t& c, std::uint64_t seed) {
  niv::ExperimentConfig e;
  e.label = c.label ? c.label : "";
  e.dgp.n_strata = c.n_strata;
  e.dgp.p_focal = c.p_focal;
  if (c.focal < 0 || c.focal > 1) niv::fail(niv::ErrorCode::InvalidConfig, "focal must be 0 or 1");
  if (c.effect_dist < 0 || c.effect_dist > 2)
    niv::fail(niv::ErrorCode::InvalidConfig, "effect_dist must be 0, 1 or 2");
  if (c.layout < 0 || c.layout > 2) niv::fail(niv::ErrorCode::InvalidConfig, "layout must be 0, 1 or 2");
  if (c.scheme < 0 || c.scheme > 2) niv::fail(niv::ErrorCode::InvalidConfig, "scheme must be 0, 1 or 2");
  e.dgp.focal = static_cast<niv::Focal>(c.focal);
  e.dgp.effect_dist = static_cast<niv::EffectDist>(c.effect_dist);
  e.dgp.mu = c.mu;
  e.dgp.partner_mean = c.partner_mean;
  e.dgp.other_mean = c.other_mean;
  e.dgp.background_sd = c.background_sd;
  e.dgp.baseline_sd = c.baseline_sd;
  e.dgp.constant_effects = c.constant_effects != 0;
  e.dgp.layout = static_cast<niv::Layout>(c.layout);
  e.dgp.seed = seed;
  e.assign.scheme = static_cast<niv::Scheme>(c.scheme);
  e.assign.gamma = c.gamma;
  e.target = e.dgp.focal == niv::Focal::Switchers ? niv::Target::SW : niv::Target::ACO;
  e.level = c.level;
  e.sensitivity = c.sensitivity != 0;
  e.reps = c.reps;
  return e;
}

const std::vector<std::string> kMetricColumns = {
    "label", "focal", "effect_dist", "layout", "scheme", "I", "p", "mu", "gamma",
    "level", "power", "iota_a_bar", "iota_b_bar", "theta_true_bar", "ci_length", "coverage",
    "sd_T", "S", "sd_T0", "S0", "level_greater", "sensitivity_level", "sensitivity_greater", "reps", "used",
    "degenerate", "unbounded_ci"};

niv_table* metrics_table(const std::vector<niv::ExperimentConfig>& cfgs, int threads) {
  auto* t = new niv_table;
  t->header = kMetricColumns;
  try {
    for (const auto& c : cfgs) {
      auto m = niv::run_experiment(c, threads);
      t->rows.push_back({c.label, niv::to_string(c.dgp.focal), niv::to_string(c.dgp.effect_dist),
                         niv::to_string(c.dgp.layout), niv::to_string(c.assign.scheme),
                         std::to_string(c.dgp.n_strata), num(c.dgp.p_focal), num(c.dgp.mu),
                         num(c.assign.gamma), num(m.level), num(m.power), num(m.iota_a_bar),
                         num(m.iota_b_bar), num(m.theta_true_bar), num(m.ci_length_mean),
                         num(m.coverage), num(m.sd_T), num(m.mean_S), num(m.sd_T0), num(m.mean_S0),
                         num(m.level_greater), num(m.sensitivity_level),
                         num(m.sensitivity_greater), std::to_string(m.reps),
                         std::to_string(m.used), std::to_string(m.degenerate),
                         std::to_string(m.unbounded_ci)});
    }
  } catch (...) {
    delete t;
    throw;
  }
  t->render();
  return t;
}

}  // namespace

extern "C" {

const char* niv_version(void) { return NIV_VERSION_STRING; }

const char* niv_status_name(niv_status_t status) {
  if (status == NIV_OK) return "Ok";
  if (status < NIV_INVALID_ARGUMENT || status > NIV_INTERNAL) return "Unknown";
  return niv::error_code_name(static_cast<niv::ErrorCode>(status));
}

const char* niv_last_error(void) { return last_error.c_str(); }

const char* niv_rng_name(void) { return niv::kRngName; }

niv_status_t niv_dataset_load(const char* path, niv_dataset_t* out) {
  return try_([&] {
    auto d = std::make_unique<niv_dataset>();
    d->data = niv::ingest_units(text(path, "path"));
    deref(out, "output") = d.release();
  });
}

niv_status_t niv_dataset_size(niv_dataset_t data, size_t* n_units) {
  return try_([&] { deref(n_units, "output") = deref(data, "dataset").data.units.size(); });
}

void niv_dataset_destroy(niv_dataset_t data) { delete data; }

void niv_match_options_default(niv_match_options_t* opts) {
  if (!opts) return;
  opts->distance = NIV_DISTANCE_RANK_MAHALANOBIS;
  opts->num_strata = 0;
  opts->cost_scale = 10000;
  opts->regularization = 1e-4;
  opts->covariates = nullptr;
  opts->n_covariates = 0;
}

niv_status_t niv_match(niv_dataset_t data, const niv_match_options_t* opts, niv_design_t* out) {
  return try_([&] {
    const auto& d = deref(data, "dataset").data;
    niv_match_options_t o;
    niv_match_options_default(&o);
    if (opts) o = *opts;
    niv::DistanceSpec spec;
    if (o.distance == NIV_DISTANCE_EUCLIDEAN)
      spec.kind = niv::DistanceKind::Euclidean;
    else if (o.distance == NIV_DISTANCE_RANK_MAHALANOBIS)
      spec.kind = niv::DistanceKind::RankMahalanobis;
    else
      niv::fail(niv::ErrorCode::InvalidArgument, "unknown distance");
    spec.regularization = o.regularization;
    for (size_t i = 0; i < o.n_covariates; ++i) spec.covariate_subset.push_back(o.covariates[i]);
    if (o.num_strata < 0) niv::fail(niv::ErrorCode::InfeasibleStrataCount, "strata must be positive");
    std::optional<int> I;
    if (o.num_strata > 0) I = o.num_strata;
    auto net = niv::build_network(d, spec, I, o.cost_scale > 0 ? o.cost_scale : 10000);
    auto result = std::make_unique<niv_design>();
    result->design = niv::solve_min_cost_flow(net);
    deref(out, "output") = result.release();
  });
}

niv_status_t niv_design_load(const char* path, niv_dataset_t data, niv_design_t* out) {
  return try_([&] {
    auto result = std::make_unique<niv_design>();
    result->design = niv::read_design(text(path, "path"), deref(data, "dataset").data);
    deref(out, "output") = result.release();
  });
}

niv_status_t niv_design_save(niv_design_t design, const char* path) {
  return try_([&] {
    std::ofstream f(text(path, "path"), std::ios::binary);
    if (!f) niv::fail(niv::ErrorCode::Io, "cannot write " + text(path, "path"));
    niv::write_design(f, deref(design, "design").design);
    if (!f) niv::fail(niv::ErrorCode::Io, "write failed: " + text(path, "path"));
  });
}

niv_status_t niv_design_size(niv_design_t design, int* num_strata) {
  return try_([&] { deref(num_strata, "output") = deref(design, "design").design.size(); });
}

niv_status_t niv_design_total_cost(niv_design_t design, int64_t* cost) {
  return try_([&] { deref(cost, "output") = deref(design, "design").design.provenance.total_cost; });
}

void niv_design_destroy(niv_design_t design) { delete design; }

niv_status_t niv_table_shape(niv_table_t table, size_t* rows, size_t* cols) {
  return try_([&] {
    const auto& t = deref(table, "table");
    deref(rows, "rows") = t.rows.size();
    deref(cols, "cols") = t.header.size();
  });
}

niv_status_t niv_table_header(niv_table_t table, size_t col, const char** name) {
  return try_([&] {
    const auto& t = deref(table, "table");
    if (col >= t.header.size()) niv::fail(niv::ErrorCode::InvalidArgument, "column out of range");
    deref(name, "output") = t.header[col].c_str();
  });
}

niv_status_t niv_table_cell(niv_table_t table, size_t row, size_t col, const char** value) {
  return try_([&] {
    const auto& t = deref(table, "table");
    if (row >= t.rows.size() || col >= t.header.size())
      niv::fail(niv::ErrorCode::InvalidArgument, "cell out of range");
    deref(value, "output") = t.rows[row][col].c_str();
  });
}

niv_status_t niv_table_csv(niv_table_t table, const char** csv) {
  return try_([&] { deref(csv, "output") = deref(table, "table").csv.c_str(); });
}

void niv_table_destroy(niv_table_t table) { delete table; }

niv_status_t niv_design_table(niv_design_t design, niv_table_t* out) {
  return try_([&] {
    std::ostringstream os;
    niv::write_design(os, deref(design, "design").design);
    std::istringstream in(os.str());
    auto t = std::make_unique<niv_table>();
    std::string line;
    std::getline(in, line);
    t->header = niv::split_csv_line(line);
    while (std::getline(in, line))
      if (!line.empty()) t->rows.push_back(niv::split_csv_line(line));
    t->render();
    deref(out, "output") = t.release();
  });
}

niv_status_t niv_balance(niv_design_t design, niv_dataset_t data, niv_table_t* out) {
  return try_([&] {
    auto report = niv::balance_report(deref(design, "design").design, deref(data, "dataset").data.schema);
    auto t = std::make_unique<niv_table>();
    t->header = {"covariate", "level", "test", "T_a", "C_a", "T_b", "C_b", "statistic", "p_value",
                 "degenerate"};
    for (const auto& row : report.rows) {
      auto tail = [&](std::vector<std::string> cells) {
        cells.push_back(num(row.statistic));
        cells.push_back(num(row.p_value));
        cells.push_back(row.degenerate ? "true" : "false");
        return cells;
      };
      if (!row.categorical) {
        std::vector<std::string> cells = {row.name, "", row.test_kind()};
        for (const auto& a : row.arms) cells.push_back(num(a.mean) + " (" + num(a.sd) + ")");
        t->rows.push_back(tail(cells));
        continue;
      }
      for (size_t l = 0; l < row.levels.size(); ++l) {
        std::vector<std::string> cells = {row.name, row.levels[l], row.test_kind()};
        for (const auto& a : row.arms) {
          double pct = a.n ? 100.0 * a.counts[l] / a.n : 0.0;
          cells.push_back(num(a.counts[l]) + " (" + num(pct) + ")");
        }
        t->rows.push_back(tail(cells));
      }
    }
    t->render();
    deref(out, "output") = t.release();
  });
}

niv_status_t niv_estimate(niv_design_t design, niv_target_t target, double level,
                          niv_alternative_t alt, double theta0, niv_estimate_t* out) {
  return try_([&] {
    const auto& d = deref(design, "design").design;
    auto& o = deref(out, "output");
    o = niv_estimate_t{};
    o.theta0 = theta0;
    if (!(level > 0 && level < 1)) niv::fail(niv::ErrorCode::InvalidArgument, "level must lie in (0,1)");
    auto a = alternative(alt);
    switch (target) {
      case NIV_TARGET_ACO:
      case NIV_TARGET_SW: {
        auto which = ratio_target(target);
        auto e = niv::invert_ci(d, which, level, a);
        o.point = e.point;
        o.se = e.se;
        fill_ci(e.ci, o);
        fill_test(which == niv::Target::ACO ? niv::test_aco(d, theta0, a) : niv::test_sw(d, theta0, a), o);
        break;
      }
      case NIV_TARGET_PROPORTION:
      case NIV_TARGET_COMPLIANCE_A:
      case NIV_TARGET_COMPLIANCE_B: {
        std::vector<double> v;
        if (target == NIV_TARGET_PROPORTION)
          v = niv::stratum_scores_proportion(d);
        else
          v = niv::stratum_scores_compliance(d, target == NIV_TARGET_COMPLIANCE_A ? niv::Group::A
                                                                                  : niv::Group::B);
        auto e = niv::ci_from_scores(v, level);
        o.point = e.point;
        o.se = e.se;
        fill_ci(e.ci, o);
        fill_test(niv::z_test(v, theta0, a), o);
        break;
      }
      case NIV_TARGET_FULL_COHORT: {
        auto aco = niv::invert_ci(d, niv::Target::ACO, level);
        auto sw = niv::invert_ci(d, niv::Target::SW, level);
        auto f = niv::extrapolated_full_cohort(d, aco, sw, level);
        o.point = f.point;
        o.se = f.se;
        o.weight_aco = f.weight_aco;
        fill_ci(f.ci, o);
        o.statistic = std::numeric_limits<double>::quiet_NaN();
        o.test_se = o.z_score = o.p_value = o.statistic;
        break;
      }
      default: niv::fail(niv::ErrorCode::InvalidArgument, "unknown target");
    }
  });
}

niv_status_t niv_test_implication(niv_design_t design, niv_test_t* out) {
  return try_([&] {
    auto t = niv::test_nested_implication(deref(design, "design").design);
    deref(out, "output") = niv_test_t{t.statistic, t.se, t.z_score, t.p_value};
  });
}

niv_status_t niv_sensitivity(niv_design_t design, niv_target_t target, double theta0,
                             const double* gammas, size_t n_gammas, double level,
                             niv_alternative_t alt, niv_table_t* out, double* changepoint,
                             int* has_changepoint) {
  return try_([&] {
    const auto& d = deref(design, "design").design;
    if (n_gammas > 0 && gammas == nullptr) niv::fail(niv::ErrorCode::InvalidArgument, "null gamma grid");
    if (!(level > 0 && level < 1)) niv::fail(niv::ErrorCode::InvalidArgument, "level must lie in (0,1)");
    std::vector<double> grid(gammas, gammas + n_gammas);
    auto sweep = niv::gamma_sweep(d, ratio_target(target), theta0, grid, level, alternative(alt));
    auto t = std::make_unique<niv_table>();
    t->header = {"gamma", "theta0", "statistic", "se", "z", "p_value", "ci_lower", "ci_upper", "reject"};
    for (const auto& r : sweep.rows)
      t->rows.push_back({num(r.gamma), num(theta0), num(r.d_bar), num(r.se), num(r.z_score),
                         num(r.p_value), num(r.ci_lower), num(r.ci_upper), r.reject ? "true" : "false"});
    t->render();
    if (has_changepoint) *has_changepoint = sweep.changepoint.has_value();
    if (changepoint)
      *changepoint = sweep.changepoint.value_or(std::numeric_limits<double>::quiet_NaN());
    deref(out, "output") = t.release();
  });
}

void niv_experiment_default(niv_experiment_t* cfg) {
  if (!cfg) return;
  niv::ExperimentConfig e;
  *cfg = niv_experiment_t{};
  cfg->label = "custom";
  cfg->n_strata = e.dgp.n_strata;
  cfg->p_focal = e.dgp.p_focal;
  cfg->focal = static_cast<int>(e.dgp.focal);
  cfg->effect_dist = static_cast<int>(e.dgp.effect_dist);
  cfg->mu = e.dgp.mu;
  cfg->partner_mean = e.dgp.partner_mean;
  cfg->other_mean = e.dgp.other_mean;
  cfg->background_sd = e.dgp.background_sd;
  cfg->baseline_sd = e.dgp.baseline_sd;
  cfg->constant_effects = e.dgp.constant_effects;
  cfg->layout = static_cast<int>(e.dgp.layout);
  cfg->scheme = static_cast<int>(e.assign.scheme);
  cfg->gamma = e.assign.gamma;
  cfg->level = e.level;
  cfg->sensitivity = e.sensitivity;
  cfg->reps = e.reps;
}

const char* niv_preset_names(void) {
  static const std::string names = [] {
    std::string s;
    for (const auto& n : niv::preset_names()) s += n + "\n";
    return s;
  }();
  return names.c_str();
}

niv_status_t niv_simulate_preset(const char* name, int reps, uint64_t seed, int threads,
                                 niv_table_t* out) {
  return try_([&] {
    auto cfgs = niv::preset(text(name, "preset"), reps);
    for (auto& c : cfgs) c.dgp.seed = seed;
    deref(out, "output") = metrics_table(cfgs, threads);
  });
}

niv_status_t niv_simulate(const niv_experiment_t* cfgs, size_t n, uint64_t seed, int threads,
                          niv_table_t* out) {
  return try_([&] {
    if (n > 0 && cfgs == nullptr) niv::fail(niv::ErrorCode::InvalidArgument, "null experiments");
    std::vector<niv::ExperimentConfig> list;
    for (size_t i = 0; i < n; ++i) list.push_back(to_config(cfgs[i], seed));
    deref(out, "output") = metrics_table(list, threads);
  });
}

niv_status_t niv_oracle(const niv_experiment_t* dgp, uint64_t seed, int statistic, double theta0,
                        niv_oracle_t* out) {
  return try_([&] {
    auto cfg = to_config(deref(dgp, "generating process"), seed);
    if (cfg.dgp.n_strata > niv::kMaxEnumerationStrata)
      niv::fail(niv::ErrorCode::TooLargeForEnumeration,
                std::to_string(cfg.dgp.n_strata) + " strata exceed the enumeration limit of " +
                    std::to_string(niv::kMaxEnumerationStrata));
    if (statistic < 0 || statistic > 2) niv::fail(niv::ErrorCode::InvalidArgument, "statistic must be 0, 1 or 2");
    auto which = static_cast<niv::OracleStatistic>(statistic);
    auto cohort = niv::sample_cohort(cfg.dgp, 0);
    double truth;
    if (which == niv::OracleStatistic::Proportion)
      truth = niv::true_iota(cohort, niv::Group::B) - niv::true_iota(cohort, niv::Group::A);
    else
      truth = niv::true_effect_ratio(cohort, which == niv::OracleStatistic::ACO ? niv::Target::ACO
                                                                               : niv::Target::SW);
    if (std::isnan(theta0)) theta0 = truth;
    if (std::isnan(theta0) && which != niv::OracleStatistic::Proportion)
      niv::fail(niv::ErrorCode::UndefinedEstimand, "the latent table has no compliers of the target kind");
    auto dist = niv::enumeration_oracle(cohort, which, theta0);
    auto& o = deref(out, "output");
    o.assignments = dist.assignments;
    o.mean = dist.mean;
    o.variance = dist.variance;
    o.mean_s2 = dist.mean_s2;
    double e = 0;
    for (const auto& s : cohort.strata) e += niv::expected_score(s, which, theta0);
    o.expected = e / static_cast<double>(cohort.strata.size());
    o.truth = truth;
  });
}

}  // extern "C"
