// nested-iv: command-line front end over the nested_iv C API.
//
// Exit codes: 0 success, 1 validation error (bad flags or inputs), 2 internal failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "nested_iv/nested_iv.h"

using nlohmann::json;

namespace {

// Failure reported by the library, carrying its status code.
struct ApiError {
  niv_status_t status;
  std::string message;
};

// Command-line misuse detected after parsing.
struct UsageError {
  std::string message;
};

void check(niv_status_t s) {
  if (s != NIV_OK) throw ApiError{s, niv_last_error()};
}

template <class T, void (*Destroy)(T)>
struct Handle {
  T h = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (h) Destroy(h);
  }
};
using Dataset = Handle<niv_dataset_t, niv_dataset_destroy>;
using Design = Handle<niv_design_t, niv_design_destroy>;
using Table = Handle<niv_table_t, niv_table_destroy>;

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Finite numbers stay numbers; infinities and NaN become strings so the JSON stays valid.
json jnum(double v) {
  if (std::isfinite(v)) return v;
  return fmt17(v);
}

struct Globals {
  unsigned long long seed = 1;
  int threads = 0;
  bool quiet = false;
  std::string manifest;
};

struct Output {
  std::string path;
  std::vector<std::string> inputs;
  niv_cli::RunManifest manifest;
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError{"cannot write " + path};
  out << text;
}

void finish(Output& o, const Globals& g, const std::vector<std::string>& argv, const std::string& cmd) {
  std::string mpath = g.manifest;
  bool to_file = !o.path.empty() && o.path != "-";
  if (mpath.empty() && to_file) mpath = o.path + ".manifest.json";
  if (mpath.empty()) return;
  auto& m = o.manifest;
  m.argv = argv;
  m.command = cmd;
  m.inputs = o.inputs;
  if (to_file) m.outputs = {o.path};
  m.seed = g.seed;
  m.threads = g.threads;
  m.write(mpath);
}

std::string table_csv(niv_table_t t) {
  const char* csv = nullptr;
  check(niv_table_csv(t, &csv));
  return csv;
}

niv_alternative_t parse_alt(const std::string& s) {
  if (s == "two-sided") return NIV_TWO_SIDED;
  if (s == "greater") return NIV_GREATER;
  if (s == "less") return NIV_LESS;
  throw UsageError{"unknown alternative '" + s + "'"};
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ':')) {
    try {
      size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError{"bad gamma grid '" + spec + "'"};
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0) || parts[1] < parts[0])
    throw UsageError{"gamma grid must be start:stop:step with step > 0 and stop >= start"};
  long n = std::lround(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
  std::vector<double> grid;
  for (long k = 0; k < n; ++k) grid.push_back(parts[0] + static_cast<double>(k) * parts[2]);
  return grid;
}

const std::map<std::string, int> kFocal = {{"SW", 0}, {"ACO", 1}};
const std::map<std::string, int> kDist = {{"uniform", 0}, {"normal", 1}, {"exponential", 2}};
const std::map<std::string, int> kLayout = {{"multinomial", 0}, {"two-switchers", 1}, {"sw-aco-pairs", 2}};
const std::map<std::string, int> kScheme = {{"uniform", 0}, {"submodel-I", 1}, {"submodel-II", 2}};

int lookup(const std::map<std::string, int>& m, const json& v, const char* key) {
  auto it = m.find(v.get<std::string>());
  if (it == m.end()) throw UsageError{std::string("unknown value for '") + key + "': " + v.dump()};
  return it->second;
}

// Fills an experiment from a JSON object; unknown keys are rejected.
niv_experiment_t experiment_from_json(const json& j, std::vector<std::string>& labels) {
  niv_experiment_t c;
  niv_experiment_default(&c);
  if (!j.is_object()) throw UsageError{"each generating process must be a JSON object"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "label") labels.push_back(v.get<std::string>());
      else if (k == "n_strata") c.n_strata = v.get<int>();
      else if (k == "p_focal") c.p_focal = v.get<double>();
      else if (k == "focal") c.focal = lookup(kFocal, v, "focal");
      else if (k == "effect_dist") c.effect_dist = lookup(kDist, v, "effect_dist");
      else if (k == "mu") c.mu = v.get<double>();
      else if (k == "partner_mean") c.partner_mean = v.get<double>();
      else if (k == "other_mean") c.other_mean = v.get<double>();
      else if (k == "background_sd") c.background_sd = v.get<double>();
      else if (k == "baseline_sd") c.baseline_sd = v.get<double>();
      else if (k == "constant_effects") c.constant_effects = v.get<bool>();
      else if (k == "layout") c.layout = lookup(kLayout, v, "layout");
      else if (k == "scheme") c.scheme = lookup(kScheme, v, "scheme");
      else if (k == "gamma") c.gamma = v.get<double>();
      else if (k == "level") c.level = v.get<double>();
      else if (k == "sensitivity") c.sensitivity = v.get<bool>();
      else throw UsageError{"unknown generating-process key '" + k + "'"};
    } catch (const json::exception& e) {
      throw UsageError{"bad value for '" + k + "': " + e.what()};
    }
  }
  if (j.find("label") == j.end()) labels.push_back("custom");
  return c;
}

std::vector<niv_experiment_t> read_dgp(const std::string& path, std::vector<std::string>& labels) {
  std::ifstream in(path);
  if (!in) throw UsageError{"cannot read " + path};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError{path + ": " + e.what()};
  }
  std::vector<niv_experiment_t> out;
  if (j.is_array())
    for (const auto& e : j) out.push_back(experiment_from_json(e, labels));
  else
    out.push_back(experiment_from_json(j, labels));
  for (size_t i = 0; i < out.size(); ++i) out[i].label = labels[i].c_str();
  return out;
}

json estimate_json(const niv_estimate_t& e, const std::string& target, const std::string& alt) {
  json comps = json::array();
  for (int k = 0; k < e.n_components; ++k)
    comps.push_back({jnum(e.component_lower[k]), jnum(e.component_upper[k])});
  static const char* shapes[] = {"bounded", "half-line", "whole-line", "disjoint"};
  static const char* methods[] = {"closed-form", "fieller-quadratic", "grid-fallback"};
  json j = {{"target", target},
            {"point", jnum(e.point)},
            {"se", jnum(e.se)},
            {"ci",
             {{"lower", jnum(e.lower)},
              {"upper", jnum(e.upper)},
              {"level", e.level},
              {"shape", shapes[e.shape]},
              {"method", methods[e.method]},
              {"components", comps}}}};
  if (target == "full-cohort") {
    j["weight_aco"] = jnum(e.weight_aco);
  } else {
    j["theta0"] = jnum(e.theta0);
    j["alternative"] = alt;
    j["statistic"] = jnum(e.statistic);
    j["statistic_se"] = jnum(e.test_se);
    j["z"] = jnum(e.z_score);
    j["p"] = jnum(e.p_value);
  }
  if (target == "aco")
    j["note"] =
        "Conditional on the matched design, the same interval is valid for the effect ratio "
        "among the group-a units alone.";
  return j;
}

void print_summary(const Globals& g, const json& j) {
  if (!g.quiet) std::cout << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Pair-of-pairs nested IV designs: matching, inference, sensitivity and simulation",
               "nested-iv"};
  app.set_version_flag("--version", std::string(niv_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--quiet", g.quiet, "Suppress summaries on standard output");
  app.add_option("--manifest", g.manifest, "Manifest path (default <out>.manifest.json)");

  Output out;

  // match
  auto* match = app.add_subcommand("match", "Build a PoP-NIV design by minimum-cost flow");
  std::string m_input, m_distance = "rank-mahalanobis", m_strata = "auto";
  long long m_scale = 10000;
  double m_reg = 1e-4;
  std::vector<std::string> m_covs;
  match->add_option("--input", m_input, "Unit CSV")->required()->check(CLI::ExistingFile);
  match->add_option("--distance", m_distance)->check(CLI::IsMember({"rank-mahalanobis", "euclidean"}))
      ->capture_default_str();
  match->add_option("--strata", m_strata, "auto or a positive integer")->capture_default_str();
  match->add_option("--cost-scale", m_scale)->check(CLI::PositiveNumber)->capture_default_str();
  match->add_option("--regularization", m_reg)->check(CLI::NonNegativeNumber)->capture_default_str();
  match->add_option("--covariates", m_covs, "Covariate subset (default all)")->delimiter(',');
  match->add_option("--out", out.path, "Design CSV (default stdout)");

  // balance
  auto* balance = app.add_subcommand("balance", "Covariate balance across the four arms");
  std::string b_input, b_design;
  balance->add_option("--input", b_input)->required()->check(CLI::ExistingFile);
  balance->add_option("--design", b_design)->required()->check(CLI::ExistingFile);
  balance->add_option("--out", out.path, "Balance CSV (default stdout)");

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Point estimate, test and confidence interval");
  std::string e_input, e_design, e_target, e_alt = "two-sided";
  double e_level = 0.95, e_theta0 = 0.0;
  estimate->add_option("--input", e_input)->required()->check(CLI::ExistingFile);
  estimate->add_option("--design", e_design)->required()->check(CLI::ExistingFile);
  estimate->add_option("--target", e_target)->required()->check(CLI::IsMember(
      {"aco", "sw", "proportion", "compliance-a", "compliance-b", "full-cohort"}));
  estimate->add_option("--level", e_level)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  estimate->add_option("--alt", e_alt)->check(CLI::IsMember({"two-sided", "greater", "less"}))
      ->capture_default_str();
  estimate->add_option("--theta0", e_theta0, "Hypothesized value for the reported test")
      ->capture_default_str();
  estimate->add_option("--out", out.path, "Result JSON (default stdout)");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "Sensitivity of the effect-ratio test to biased assignment");
  std::string s_input, s_design, s_target, s_grid = "1:2:0.1", s_alt = "greater";
  double s_theta0 = 0.0, s_level = 0.95;
  sens->add_option("--input", s_input)->required()->check(CLI::ExistingFile);
  sens->add_option("--design", s_design)->required()->check(CLI::ExistingFile);
  sens->add_option("--target", s_target)->required()->check(CLI::IsMember({"aco", "sw"}));
  sens->add_option("--theta0", s_theta0)->capture_default_str();
  sens->add_option("--gamma-grid", s_grid, "start:stop:step or a single value")->capture_default_str();
  sens->add_option("--level", s_level)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sens->add_option("--alt", s_alt)->check(CLI::IsMember({"two-sided", "greater", "less"}))
      ->capture_default_str();
  sens->add_option("--out", out.path, "Sweep CSV (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo experiments");
  std::string sim_preset, sim_dgp;
  int sim_reps = 1000;
  auto* opt_preset = sim->add_option("--preset", sim_preset)->check(CLI::IsMember(
      {"table2", "tableS2", "tableS3", "tableS4", "tableS5-7", "tableS8"}));
  auto* opt_dgp = sim->add_option("--dgp", sim_dgp, "JSON object or array of generating processes")
                      ->check(CLI::ExistingFile);
  opt_preset->excludes(opt_dgp);
  sim->add_option("--reps", sim_reps)->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--out", out.path, "Metrics CSV (default stdout)");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exact randomization distribution by enumeration");
  std::string o_dgp, o_stat = "sw";
  int o_strata = 2;
  double o_theta0 = std::nan("");
  oracle->add_option("--dgp", o_dgp, "JSON generating process (default: switchers, p = 0.5)")
      ->check(CLI::ExistingFile);
  oracle->add_option("--strata", o_strata, "Number of strata (at most 6)")->capture_default_str();
  oracle->add_option("--statistic", o_stat)->check(CLI::IsMember({"proportion", "aco", "sw"}))
      ->capture_default_str();
  oracle->add_option("--theta0", o_theta0, "Hypothesized value (default: the table's true value)");
  oracle->add_option("--out", out.path, "Result JSON (default stdout)");

  if (argc < 2) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string cmd = app.get_subcommands().front()->get_name();
  auto& settings = out.manifest.settings;
  try {
    if (cmd == "match") {
      Dataset data;
      check(niv_dataset_load(m_input.c_str(), &data.h));
      niv_match_options_t opts;
      niv_match_options_default(&opts);
      opts.distance = m_distance == "euclidean" ? NIV_DISTANCE_EUCLIDEAN : NIV_DISTANCE_RANK_MAHALANOBIS;
      if (m_strata != "auto") {
        try {
          size_t used = 0;
          opts.num_strata = std::stoi(m_strata, &used);
          if (used != m_strata.size() || opts.num_strata < 1) throw std::invalid_argument(m_strata);
        } catch (const std::exception&) {
          throw UsageError{"--strata must be 'auto' or a positive integer"};
        }
      }
      opts.cost_scale = m_scale;
      opts.regularization = m_reg;
      std::vector<const char*> cov_ptrs;
      for (const auto& c : m_covs) cov_ptrs.push_back(c.c_str());
      opts.covariates = cov_ptrs.empty() ? nullptr : cov_ptrs.data();
      opts.n_covariates = cov_ptrs.size();
      Design design;
      check(niv_match(data.h, &opts, &design.h));
      int I = 0;
      int64_t cost = 0;
      check(niv_design_size(design.h, &I));
      check(niv_design_total_cost(design.h, &cost));
      if (out.path.empty() || out.path == "-") {
        Table t;
        check(niv_design_table(design.h, &t.h));
        std::cout << table_csv(t.h);
      } else {
        check(niv_design_save(design.h, out.path.c_str()));
        print_summary(g, {{"strata", I}, {"total_cost", cost}, {"design", out.path}});
      }
      out.inputs = {m_input};
      settings = {{"distance", m_distance}, {"strata", m_strata}, {"resolved_strata", I},
                  {"cost_scale", m_scale}, {"regularization", m_reg}, {"covariates", m_covs}};
      out.manifest.results = {{"total_cost", cost}};
    } else if (cmd == "balance") {
      Dataset data;
      Design design;
      check(niv_dataset_load(b_input.c_str(), &data.h));
      check(niv_design_load(b_design.c_str(), data.h, &design.h));
      Table t;
      check(niv_balance(design.h, data.h, &t.h));
      emit(table_csv(t.h), out.path);
      out.inputs = {b_input, b_design};
    } else if (cmd == "estimate") {
      Dataset data;
      Design design;
      check(niv_dataset_load(e_input.c_str(), &data.h));
      check(niv_design_load(e_design.c_str(), data.h, &design.h));
      static const std::map<std::string, niv_target_t> targets = {
          {"aco", NIV_TARGET_ACO},
          {"sw", NIV_TARGET_SW},
          {"proportion", NIV_TARGET_PROPORTION},
          {"compliance-a", NIV_TARGET_COMPLIANCE_A},
          {"compliance-b", NIV_TARGET_COMPLIANCE_B},
          {"full-cohort", NIV_TARGET_FULL_COHORT}};
      niv_estimate_t est;
      check(niv_estimate(design.h, targets.at(e_target), e_level, parse_alt(e_alt), e_theta0, &est));
      json j = estimate_json(est, e_target, e_alt);
      if (e_target == "proportion") {
        niv_test_t imp;
        check(niv_test_implication(design.h, &imp));
        j["implication_test"] = {{"alternative", "less"}, {"statistic", jnum(imp.statistic)},
                                 {"se", jnum(imp.se)}, {"z", jnum(imp.z_score)}, {"p", jnum(imp.p_value)}};
      }
      emit(j.dump(2) + "\n", out.path);
      out.inputs = {e_input, e_design};
      settings = {{"target", e_target}, {"level", e_level}, {"alt", e_alt}, {"theta0", e_theta0}};
      out.manifest.results = {{"point", j["point"]}, {"ci", j["ci"]}};
    } else if (cmd == "sensitivity") {
      Dataset data;
      Design design;
      check(niv_dataset_load(s_input.c_str(), &data.h));
      check(niv_design_load(s_design.c_str(), data.h, &design.h));
      auto grid = parse_grid(s_grid);
      Table t;
      double cp = 0;
      int has_cp = 0;
      check(niv_sensitivity(design.h, s_target == "aco" ? NIV_TARGET_ACO : NIV_TARGET_SW, s_theta0,
                            grid.data(), grid.size(), s_level, parse_alt(s_alt), &t.h, &cp, &has_cp));
      emit(table_csv(t.h), out.path);
      json changepoint = has_cp ? jnum(cp) : json(nullptr);
      out.inputs = {s_input, s_design};
      settings = {{"target", s_target}, {"theta0", s_theta0}, {"gamma_grid", s_grid},
                  {"level", s_level}, {"alt", s_alt}, {"gamma_search_cap", 20}};
      out.manifest.results = {{"gamma_changepoint", changepoint}};
      if (!out.path.empty() && out.path != "-") print_summary(g, {{"gamma_changepoint", changepoint}});
    } else if (cmd == "simulate") {
      if (sim_preset.empty() == sim_dgp.empty()) throw UsageError{"simulate needs exactly one of --preset or --dgp"};
      Table t;
      if (!sim_preset.empty()) {
        check(niv_simulate_preset(sim_preset.c_str(), sim_reps, g.seed, g.threads, &t.h));
        settings = {{"preset", sim_preset}};
      } else {
        std::vector<std::string> labels;
        auto cfgs = read_dgp(sim_dgp, labels);
        for (auto& c : cfgs) c.reps = sim_reps;
        check(niv_simulate(cfgs.data(), cfgs.size(), g.seed, g.threads, &t.h));
        out.inputs = {sim_dgp};
        settings = {{"dgp", sim_dgp}};
      }
      settings["reps"] = sim_reps;
      emit(table_csv(t.h), out.path);
    } else if (cmd == "oracle") {
      niv_experiment_t c;
      std::vector<std::string> labels;
      if (!o_dgp.empty()) {
        auto cfgs = read_dgp(o_dgp, labels);
        if (cfgs.size() != 1) throw UsageError{"oracle takes a single generating process"};
        c = cfgs.front();
        out.inputs = {o_dgp};
      } else {
        niv_experiment_default(&c);
      }
      c.n_strata = o_strata;
      int stat = o_stat == "proportion" ? 0 : o_stat == "aco" ? 1 : 2;
      niv_oracle_t r;
      check(niv_oracle(&c, g.seed, stat, o_theta0, &r));
      json j = {{"statistic", o_stat},
                {"strata", o_strata},
                {"assignments", r.assignments},
                {"truth", jnum(r.truth)},
                {"exact_mean", jnum(r.mean)},
                {"closed_form_mean", jnum(r.expected)},
                {"exact_variance", jnum(r.variance)},
                {"expected_s2", jnum(r.mean_s2)}};
      emit(j.dump(2) + "\n", out.path);
      settings = {{"strata", o_strata}, {"statistic", o_stat},
                  {"theta0", std::isnan(o_theta0) ? json("truth") : json(o_theta0)}};
    }
    finish(out, g, args, cmd);
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "InvalidArgument"}, {"message", e.message}}.dump() << '\n';
    return 1;
  } catch (const ApiError& e) {
    std::cerr << json{{"error", niv_status_name(e.status)}, {"message", e.message}}.dump() << '\n';
    return e.status == NIV_INTERNAL ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }
  return 0;
}
