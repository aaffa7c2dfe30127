#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nested_iv/data_model.hpp"
#include "nested_iv/inference.hpp"

namespace niv {

enum class Focal { Switchers, AlwaysCompliers };
enum class EffectDist { Uniform, Normal, Exponential };
// Multinomial: independent strata draws. TwoSwitchersPerStratum: two switchers at random
// positions, the other two units from the five other kinds. SwitcherAcoPairs: one pair
// of switchers and one pair of always-compliers.
enum class Layout { Multinomial, TwoSwitchersPerStratum, SwitcherAcoPairs };

const char* to_string(Focal f);
const char* to_string(EffectDist e);
const char* to_string(Layout l);

struct DgpConfig {
  int n_strata = 100;
  double p_focal = 0.5;
  Focal focal = Focal::Switchers;
  EffectDist effect_dist = EffectDist::Normal;
  double mu = 0.0;
  // Mean effect of the non-focal member of {SW, ACO}: always-compliers when switchers
  // are focal, switchers when always-compliers are focal.
  double partner_mean = 0.5;
  double other_mean = 0.1;       // AT-NT, AAT, NT-AT, ANT
  double background_sd = 1.0;
  double baseline_sd = 1.0;      // r_{d=0} ~ N(0, baseline_sd^2)
  bool constant_effects = false; // every effect fixed at its stratum mean
  Layout layout = Layout::Multinomial;
  std::uint64_t seed = 1;

  void validate() const;
};

using LatentStratum = std::array<LatentUnit, 4>;  // positions i11, i12, i21, i22

struct SimulatedCohort {
  std::vector<LatentStratum> strata;
};

SimulatedCohort sample_cohort(const DgpConfig& cfg, std::uint64_t replicate = 0);

enum class Scheme { Uniform, BiasedSubmodelI, BiasedSubmodelII };
const char* to_string(Scheme s);

struct AssignmentConfig {
  Scheme scheme = Scheme::Uniform;
  double gamma = 1.0;
  // theta used in the transformed outcome R - theta D of the biased criterion.
  double criterion_theta = 0.0;
};

// The eight configurations of one stratum, listed as z at (i11, i12, i21, i22).
// The first four give group a to the first pair.
const std::array<std::array<IvLevel, 4>, 8>& omega();

// Configuration index per stratum.
std::vector<int> draw_assignment(const SimulatedCohort& cohort, const AssignmentConfig& acfg,
                                 std::uint64_t seed, std::uint64_t replicate = 0);

StratumObs observe_stratum(const LatentStratum& s, int config);
std::vector<StratumObs> observe_cohort(const SimulatedCohort& cohort, const std::vector<int>& configs);
PopNivDesign to_design(const SimulatedCohort& cohort, const std::vector<int>& configs);
PopNivDesign assign_and_observe(const SimulatedCohort& cohort, const AssignmentConfig& acfg,
                                std::uint64_t seed, std::uint64_t replicate = 0);

// Finite-population quantities of a latent table.
double true_iota(const SimulatedCohort& cohort, Group g);
// Ratio estimand; NaN when the denominator is zero.
double true_effect_ratio(const SimulatedCohort& cohort, Target which);
// Mean of r1 - r0 over units of one principal stratum; NaN when there are none.
double stratum_sate(const SimulatedCohort& cohort, PrincipalKind kind);

struct ExperimentConfig {
  std::string label;
  DgpConfig dgp;
  AssignmentConfig assign;
  Target target = Target::SW;
  double level = 0.95;
  int reps = 1000;
  // Also run the biased-assignment sensitivity test at assign.gamma.
  bool sensitivity = false;
};

struct ReplicateMetrics {
  int reps = 0;
  int used = 0;        // replicates entering level/coverage denominators
  int degenerate = 0;  // no focal units realized, or the sample ratio is undefined
  double level = 0.0;  // two-sided rejection at theta_true
  double power = 0.0;  // two-sided rejection at theta = 0
  double level_greater = 0.0;      // one-sided (greater) rejection at theta_true
  // Sensitivity-test rejection at theta_true and gamma = assign.gamma: two-sided (both
  // one-sided tests at alpha / 2) and one-sided greater at alpha.
  double sensitivity_level = 0.0;
  double sensitivity_greater = 0.0;
  double iota_a_bar = 0.0;
  double iota_b_bar = 0.0;
  double theta_true_bar = 0.0;
  double ci_length_mean = 0.0;     // over bounded intervals
  int unbounded_ci = 0;
  double coverage = 0.0;           // percent
  double sd_T = 0.0;
  double mean_S = 0.0;
  double sd_T0 = 0.0;
  double mean_S0 = 0.0;
};

// threads <= 0 means hardware concurrency. Results do not depend on the thread count.
ReplicateMetrics run_experiment(const ExperimentConfig& cfg, int threads = 0);

std::vector<ExperimentConfig> preset(const std::string& name, int reps);
std::vector<std::string> preset_names();

// Monte Carlo standard error of a rejection rate.
double mc_se(double rate, int n);

enum class OracleStatistic { Proportion, ACO, SW };

struct ExactDistribution {
  std::uint64_t assignments = 0;
  double mean = 0.0;      // of the statistic mean(V_i)
  double variance = 0.0;  // over the equiprobable assignments
  double mean_s2 = 0.0;   // expected S^2
  std::vector<double> values;
};

inline constexpr int kMaxEnumerationStrata = 6;

ExactDistribution enumeration_oracle(const SimulatedCohort& latent, OracleStatistic which,
                                     double theta0 = 0.0);

// (1/4) sum over the stratum of the Z-averaged score, the closed-form E[V_i].
double expected_score(const LatentStratum& s, OracleStatistic which, double theta0 = 0.0);

}  // namespace niv
