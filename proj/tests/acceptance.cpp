// Acceptance checks. Prints one PASS/FAIL line per criterion, with indented detail
// lines above it, and exits non-zero when any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flow_oracle.hpp"
#include "nested_iv/errors.hpp"
#include "nested_iv/inference.hpp"
#include "nested_iv/io.hpp"
#include "nested_iv/matching.hpp"
#include "nested_iv/sensitivity.hpp"
#include "nested_iv/simulation.hpp"
#include "plco_reconstruction.hpp"

namespace fs = std::filesystem;
using namespace niv;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back(std::string(ok ? "ok   " : "MISS ") + what);
  }
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool near(double x, double target, double tol) { return std::fabs(x - target) <= tol; }

// ---- 1. reconstruction of the cohort analysis ----

Outcome criterion_plco() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  auto rec = plco::reconstruct();
  const auto& d = rec.design;
  o.require(d.size() == plco::kStrata, fmt("%d strata", d.size()));

  int uptake_a = 0, uptake_b = 0, cancers[4] = {0, 0, 0, 0};
  for (const auto& s : d.strata) {
    uptake_a += s.treated(Group::A).d;
    uptake_b += s.treated(Group::B).d;
    cancers[0] += s.control(Group::A).r > 0;
    cancers[1] += s.treated(Group::A).r > 0;
    cancers[2] += s.control(Group::B).r > 0;
    cancers[3] += s.treated(Group::B).r > 0;
  }
  o.require(uptake_a == plco::kUptakeA && uptake_b == plco::kUptakeB,
            fmt("uptake %d / %d", uptake_a, uptake_b));
  o.require(cancers[0] == 61 && cancers[1] == 51 && cancers[2] == 45 && cancers[3] == 47,
            fmt("cancers C_a %d, T_a %d, C_b %d, T_b %d", cancers[0], cancers[1], cancers[2], cancers[3]));

  auto ia = ci_compliance_rate(d, Group::A, 0.95);
  auto ib = ci_compliance_rate(d, Group::B, 0.95);
  auto prop = ci_proportion(d, 0.95);
  auto aco = invert_ci(d, Target::ACO, 0.95);
  auto sw = invert_ci(d, Target::SW, 0.95);
  auto full = extrapolated_full_cohort(d, aco, sw, 0.95);
  o.require(near(ia.point, 0.522, 0.001), fmt("iota_a %.4f", ia.point));
  o.require(near(ib.point, 0.789, 0.001), fmt("iota_b %.4f", ib.point));
  o.require(near(prop.point, 0.267, 0.001),
            fmt("switcher proportion %.4f (%.4f, %.4f)", prop.point, prop.ci.lower, prop.ci.upper));
  o.require(near(aco.point, -0.0062, 0.0002), fmt("kappa %.5f", aco.point));
  o.require(near(sw.point, 0.0146, 0.0003), fmt("lambda %.5f", sw.point));
  o.require(near(full.point, 0.0037, 0.0005),
            fmt("full cohort %.5f (%.5f, %.5f)", full.point, full.ci.lower, full.ci.upper));

  o.require(aco.ci.shape == CiShape::Bounded && aco.ci.contains(-0.0062) && aco.ci.lower < 0 &&
                aco.ci.upper > 0,
            fmt("ACO interval (%.5f, %.5f) vs reference (-0.0190, 0.0065)", aco.ci.lower, aco.ci.upper));
  o.require(sw.ci.shape == CiShape::Bounded && sw.ci.contains(0.0146) && sw.ci.lower < 0 &&
                sw.ci.upper > 0,
            fmt("SW interval (%.5f, %.5f) vs reference (-0.0197, 0.0491)", sw.ci.lower, sw.ci.upper));
  double secs = seconds_since(t0);
  o.require(secs < 10, fmt("runtime %.2f s", secs));
  return o;
}

// ---- 2. randomization-inference simulation table ----

struct Table2Row {
  int I;
  double p, mu, power, length;
};

Outcome criterion_table2() {
  Outcome o;
  const Table2Row rows[] = {{500, 0.3, 0, 0.05, 1.54},  {500, 0.3, 1, 0.76, 1.63},
                            {500, 0.5, 0, 0.04, 0.87},  {500, 0.5, 1, 0.99, 0.91},
                            {500, 0.7, 0, 0.04, 0.61},  {500, 0.7, 1, 1.00, 0.63},
                            {1000, 0.3, 0, 0.05, 1.05}, {1000, 0.3, 1, 0.96, 1.10},
                            {1000, 0.5, 0, 0.04, 0.61}, {1000, 0.5, 1, 1.00, 0.63},
                            {1000, 0.7, 0, 0.04, 0.43}, {1000, 0.7, 1, 1.00, 0.44}};
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& r : rows) {
    ExperimentConfig c;
    c.dgp.n_strata = r.I;
    c.dgp.p_focal = r.p;
    c.dgp.mu = r.mu;
    c.dgp.effect_dist = EffectDist::Normal;
    c.dgp.seed = 2024;
    c.reps = 500;
    auto m = run_experiment(c, 0);
    double rel = std::fabs(m.ci_length_mean / r.length - 1);
    bool ok = near(m.level, 0.05, 0.025) && near(m.power, r.power, 0.06) && near(m.coverage, 95, 2.5) &&
              rel <= 0.07;
    o.require(ok, fmt("I=%d p=%.1f mu=%.0f: level %.3f, power %.3f (target %.2f), coverage %.1f, "
                      "length %.3f (target %.2f, %+.1f%%)",
                      r.I, r.p, r.mu, m.level, m.power, r.power, m.coverage, m.ci_length_mean, r.length,
                      100 * (m.ci_length_mean / r.length - 1)));
  }
  double secs = seconds_since(t0);
  o.require(secs < 600, fmt("runtime %.1f s", secs));
  return o;
}

// ---- 3. biased randomization ----

Outcome criterion_biased() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  const double gammas[] = {1.2, 1.5, 2.0};
  const double floor_thm2[] = {0.55, 0.95, 0.99};
  for (int k = 0; k < 3; ++k) {
    ExperimentConfig c;
    c.dgp.n_strata = 1000;
    c.dgp.p_focal = 0.5;
    c.dgp.mu = 0.0;
    c.dgp.seed = 2024;
    c.assign.scheme = Scheme::BiasedSubmodelII;
    c.assign.gamma = gammas[k];
    c.sensitivity = true;
    c.reps = 300;
    auto m = run_experiment(c, 0);
    double cap = 0.05 + 2 * mc_se(0.05, m.used);
    o.require(m.level >= floor_thm2[k] && m.sensitivity_level <= cap,
              fmt("Submodel II gamma=%.1f: randomization test %.3f (need >= %.2f), sensitivity test %.3f "
                  "(need <= %.3f; one-sided at 0.05: %.3f)",
                  gammas[k], m.level, floor_thm2[k], m.sensitivity_level, cap, m.sensitivity_greater));
  }
  ExperimentConfig b;
  b.dgp.n_strata = 1000;
  b.dgp.p_focal = 0.5;
  b.dgp.mu = 0.0;
  b.dgp.layout = Layout::SwitcherAcoPairs;
  b.dgp.baseline_sd = 0.1;
  b.dgp.constant_effects = true;
  b.dgp.partner_mean = 0.5;
  b.dgp.seed = 2024;
  b.assign.scheme = Scheme::BiasedSubmodelII;
  b.assign.gamma = 1.5;
  b.sensitivity = true;
  b.reps = 300;
  auto m = run_experiment(b, 0);
  o.require(m.sensitivity_level > 0.005 && m.sensitivity_level < 0.05,
            fmt("switcher/always-complier pairs gamma=1.5: sensitivity test %.3f (need in (0.005, 0.05); "
                "one-sided at 0.05: %.3f)",
                m.sensitivity_level, m.sensitivity_greater));
  double secs = seconds_since(t0);
  o.require(secs < 300, fmt("runtime %.1f s", secs));
  return o;
}

// ---- 4. exact enumeration ----

Outcome criterion_enumeration() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  double worst_prop = 0, worst_null = 0, worst_gap = 0, worst_equal = 0;
  int direction_failures = 0, ratios = 0;
  for (int k = 0; k < 20; ++k) {
    DgpConfig c;
    c.n_strata = 1 + k % 3;
    c.p_focal = 0.3 + 0.02 * k;
    c.mu = 0.25 * (k % 4);
    c.effect_dist = static_cast<EffectDist>(k % 3);
    c.focal = k % 5 == 4 ? Focal::AlwaysCompliers : Focal::Switchers;
    c.seed = 7000 + k;
    auto cohort = sample_cohort(c);
    auto prop = enumeration_oracle(cohort, OracleStatistic::Proportion);
    worst_prop = std::max(worst_prop, std::fabs(prop.mean - (true_iota(cohort, Group::B) -
                                                               true_iota(cohort, Group::A))));
    for (auto [which, target] : {std::pair{OracleStatistic::ACO, Target::ACO},
                                 std::pair{OracleStatistic::SW, Target::SW}}) {
      double theta = true_effect_ratio(cohort, target);
      if (std::isnan(theta)) continue;
      ++ratios;
      auto e = enumeration_oracle(cohort, which, theta);
      worst_null = std::max(worst_null, std::fabs(e.mean));
      if (c.n_strata > 1) {
        worst_gap = std::min(worst_gap, e.mean_s2 - e.variance);
        if (e.variance > e.mean_s2 + 1e-12) ++direction_failures;
      }
    }

    // The same seed with every effect held at its mean.
    c.n_strata = 2 + k % 2;
    c.constant_effects = true;
    auto flat = sample_cohort(c);
    for (auto [which, target] : {std::pair{OracleStatistic::ACO, Target::ACO},
                                 std::pair{OracleStatistic::SW, Target::SW}}) {
      double theta = true_effect_ratio(flat, target);
      if (std::isnan(theta)) continue;
      auto e = enumeration_oracle(flat, which, theta);
      worst_equal = std::max(worst_equal, std::fabs(e.variance - e.mean_s2));
    }
  }
  o.require(worst_prop <= 1e-12, fmt("max |E[V] - (iota_b - iota_a)| = %.2e", worst_prop));
  o.require(worst_null <= 1e-12, fmt("max |E[T(theta_true)]| = %.2e over %d ratios", worst_null, ratios));
  o.require(direction_failures == 0,
            fmt("Var <= E[S^2] in every table (smallest E[S^2] - Var = %.2e)", worst_gap));
  o.require(worst_equal <= 1e-10, fmt("constant effects: max |Var - E[S^2]| = %.2e", worst_equal));
  double secs = seconds_since(t0);
  o.require(secs < 30, fmt("runtime %.2f s", secs));
  return o;
}

// ---- 5. flow solver ----

Outcome criterion_flow() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(31337);
  int cost_mismatch = 0, invalid = 0;
  for (int k = 0; k < 100; ++k) {
    auto in = flow_oracle::random_instance(gen, 4, 2);
    auto net = build_network_from_costs(in.arms, in.ta_ca, in.ca_tb, in.tb_cb, in.I);
    auto sol = min_cost_flow(net);
    auto design = extract_design(net, sol);
    if (sol.total_cost != flow_oracle::brute_force_cost(in, net.cost_scale)) ++cost_mismatch;
    if (!flow_oracle::structurally_valid(net, sol, design)) ++invalid;
  }
  o.require(cost_mismatch == 0, fmt("%d of 100 costs differ from exhaustive search", cost_mismatch));
  o.require(invalid == 0, fmt("%d of 100 solutions break an invariant", invalid));
  double secs = seconds_since(t0);
  o.require(secs < 10, fmt("runtime %.2f s", secs));
  return o;
}

// ---- 6. properties ----

int run(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_covariate_units(const fs::path& p) {
  std::ofstream out(p);
  out << "unit_id,z,d,r,age,sex,smoker\n";
  std::mt19937 gen(77);
  std::uniform_int_distribution<int> age(55, 74);
  std::bernoulli_distribution coin(0.5), rare(0.1);
  const char* arms[4] = {"1a", "0a", "1b", "0b"};
  const char* smoke[3] = {"never", "former", "current"};
  const int sizes[4] = {18, 22, 20, 25};
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < sizes[a]; ++i)
      out << "id" << a << "_" << i << "," << arms[a] << "," << (a % 2 == 0 && coin(gen)) << ","
          << rare(gen) << "," << age(gen) << "," << (coin(gen) ? "F" : "M") << ","
          << smoke[gen() % 3] << "\n";
}

Outcome criterion_properties() {
  Outcome o;
  // f monotone in x, non-increasing in gamma, identity at gamma = 1.
  double worst_collapse = 0;
  bool monotone = true;
  for (double x = -5; x <= 5; x += 0.25) {
    worst_collapse = std::max(worst_collapse, std::fabs(gamma_adjust(x, 1.0) - x));
    for (double g = 1; g < 6; g += 0.5) {
      monotone = monotone && gamma_adjust(x + 0.25, g) >= gamma_adjust(x, g) - 1e-12;
      monotone = monotone && gamma_adjust(x, g + 0.5) <= gamma_adjust(x, g) + 1e-12;
    }
  }
  o.require(monotone, "f is non-decreasing in x and non-increasing in gamma");

  // Sensitivity tests at gamma = 1 equal the randomization tests.
  double worst_z = 0;
  for (int k = 0; k < 10; ++k) {
    DgpConfig c;
    c.n_strata = 200;
    c.mu = 0.5;
    c.seed = 300 + k;
    auto cohort = sample_cohort(c);
    auto obs = observe_cohort(cohort, draw_assignment(cohort, {}, c.seed));
    for (double theta : {0.0, 0.5}) {
      auto s = sensitivity_test(obs, Target::SW, theta, 1.0, Alternative::Greater);
      auto t = test_effect(obs, Target::SW, theta, Alternative::Greater);
      worst_z = std::max({worst_z, std::fabs(s.z_score - t.z_score), std::fabs(s.p_value - t.p_value)});
    }
  }
  o.require(worst_collapse <= 1e-12 && worst_z <= 1e-12,
            fmt("gamma = 1 collapse: f %.1e, tests %.1e", worst_collapse, worst_z));

  // Duality of intervals and tests on 50-point grids.
  int grids = 0, disagreements = 0;
  for (int k = 0; k < 20; ++k) {
    DgpConfig c;
    c.n_strata = 60 + 20 * k;
    c.p_focal = 0.3 + 0.02 * k;
    c.mu = 0.5;
    c.seed = 400 + k;
    auto cohort = sample_cohort(c);
    auto obs = observe_cohort(cohort, draw_assignment(cohort, {}, c.seed));
    for (Target which : {Target::ACO, Target::SW}) {
      Estimate e;
      try {
        e = invert_ci(obs, which, 0.95);
      } catch (const niv::Error&) {
        continue;
      }
      ++grids;
      double half = std::isfinite(e.ci.length()) ? e.ci.length() : 10.0;
      for (int g = 0; g < 50; ++g) {
        double theta = e.point - half + 2 * half * g / 49.0;
        auto t = test_effect(obs, which, theta, Alternative::TwoSided);
        if (e.ci.contains(theta) == rejects(t, 0.95)) ++disagreements;
      }
    }
  }
  o.require(disagreements == 0, fmt("duality: %d disagreements on %d grids", disagreements, grids));

  // Effect ratios of the latent table equal the average effects of the stratum.
  double worst_prop1 = 0;
  for (int k = 0; k < 100; ++k) {
    DgpConfig c;
    c.n_strata = 50 + k;
    c.p_focal = 0.2 + 0.006 * k;
    c.mu = 0.1 * (k % 11);
    c.effect_dist = static_cast<EffectDist>(k % 3);
    c.focal = k % 2 ? Focal::AlwaysCompliers : Focal::Switchers;
    c.seed = 9000 + k;
    auto cohort = sample_cohort(c);
    worst_prop1 = std::max({worst_prop1,
                            std::fabs(true_effect_ratio(cohort, Target::SW) -
                                      stratum_sate(cohort, PrincipalKind::SW)),
                            std::fabs(true_effect_ratio(cohort, Target::ACO) -
                                      stratum_sate(cohort, PrincipalKind::ACO))});
  }
  o.require(worst_prop1 <= 1e-10, fmt("ratio equals stratum average effect: max gap %.1e", worst_prop1));

  // Every CLI command twice with the same seed.
  fs::path dir = fs::temp_directory_path() / "nested_iv_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir / "one");
  fs::create_directories(dir / "two");
  write_covariate_units(dir / "cov.csv");
  plco::write_files(plco::reconstruct(), dir.string());
  {
    std::ofstream dgp(dir / "dgp.json");
    dgp << R"([{"label": "small", "n_strata": 80, "p_focal": 0.5, "mu": 0.5},
               {"label": "biased", "n_strata": 80, "scheme": "submodel-II", "gamma": 1.5, "sensitivity": true}])";
  }
  const std::string cli = NIV_CLI_PATH;
  const std::string d = dir.string();
  struct Command {
    std::string name, args, out;
  };
  std::vector<Command> cmds = {
      {"match", "match --input " + d + "/cov.csv --strata auto", "design.csv"},
      {"match-euclidean", "match --input " + d + "/cov.csv --distance euclidean --strata 12", "design_e.csv"},
      {"simulate-dgp", "simulate --dgp " + d + "/dgp.json --reps 30 --threads 2", "sim.csv"},
      {"simulate-preset", "simulate --preset tableS4 --reps 2", "preset.csv"},
      {"oracle", "oracle --strata 3 --statistic sw", "oracle.json"},
      {"estimate-sw", "estimate --input " + d + "/units.csv --design " + d + "/design.csv --target sw",
       "sw.json"},
      {"estimate-full", "estimate --input " + d + "/units.csv --design " + d + "/design.csv --target full-cohort",
       "full.json"},
      {"estimate-prop", "estimate --input " + d + "/units.csv --design " + d + "/design.csv --target proportion",
       "prop.json"},
      {"sensitivity",
       "sensitivity --input " + d + "/units.csv --design " + d + "/design.csv --target aco --gamma-grid 1:1.5:0.1",
       "sens.csv"},
  };
  int mismatches = 0, failures = 0;
  for (const char* run_dir : {"one", "two"})
    for (const auto& c : cmds) {
      std::string out = d + "/" + run_dir + "/" + c.out;
      std::string line = "\"" + cli + "\" --seed 11 --quiet " + c.args + " --out " + out + " 2>/dev/null";
      if (run(line) != 0) {
        ++failures;
        o.notes.push_back("      command failed: " + c.name);
      }
    }
  // balance reads the design written by match.
  for (const char* run_dir : {"one", "two"}) {
    std::string base = d + "/" + run_dir;
    if (run("\"" + cli + "\" --quiet balance --input " + d + "/cov.csv --design " + base + "/design.csv --out " +
            base + "/balance.csv 2>/dev/null") != 0)
      ++failures;
  }
  cmds.push_back({"balance", "", "balance.csv"});
  for (const auto& c : cmds) {
    auto a = slurp(dir / "one" / c.out), b = slurp(dir / "two" / c.out);
    if (a.empty() || a != b) {
      ++mismatches;
      o.notes.push_back("      differs or empty: " + c.name);
    }
  }
  o.require(failures == 0 && mismatches == 0,
            fmt("CLI determinism: %zu commands, %d failures, %d mismatches", cmds.size(), failures, mismatches));
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "cohort reconstruction estimates", criterion_plco},
      {2, "randomization inference simulation table", criterion_table2},
      {3, "biased randomization table", criterion_biased},
      {4, "exact enumeration oracle", criterion_enumeration},
      {5, "flow solver oracle", criterion_flow},
      {6, "property suite", criterion_properties},
  };
  // Optional arguments select criteria by number.
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && std::find(pick.begin(), pick.end(), c.id) == pick.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.notes.push_back(std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
