#pragma once

#include <span>
#include <utility>
#include <vector>

#include "nested_iv/data_model.hpp"

namespace niv {

enum class Alternative { TwoSided, Greater, Less };
enum class Target { ACO, SW };

const char* to_string(Alternative a);
const char* to_string(Target t);

// Observed (R, D) of the treated and control unit of each IV group in one stratum.
struct StratumObs {
  double r_ta = 0, r_ca = 0, r_tb = 0, r_cb = 0;
  double d_ta = 0, d_ca = 0, d_tb = 0, d_cb = 0;
};

StratumObs observe(const MatchedStratum& s);
std::vector<StratumObs> observe(const PopNivDesign& design);

// V_i as sums of Z^g-weighted contrasts over the four units of each stratum.
std::vector<double> stratum_scores_proportion(const PopNivDesign& design);
std::vector<double> stratum_scores_compliance(const PopNivDesign& design, Group g);
std::vector<double> stratum_scores_aco(const PopNivDesign& design, double kappa0);
std::vector<double> stratum_scores_sw(const PopNivDesign& design, double lambda0);

// V_i(theta) = a_i - theta * b_i for the ACO or SW statistic.
struct AffineScores {
  std::vector<double> a;
  std::vector<double> b;

  std::vector<double> at(double theta) const;
};
AffineScores affine_scores(std::span<const StratumObs> obs, Target which);

struct TestResult {
  double statistic = 0.0;
  double se = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  Alternative alternative = Alternative::TwoSided;
  double hypothesized_value = 0.0;
};

// z-test of mean(v) against c with se = sqrt(S^2).
TestResult z_test(std::span<const double> v, double c, Alternative alt);
bool rejects(const TestResult& t, double level);
// Critical value z_{1-alpha/2} (two-sided) or z_{1-alpha} (one-sided), alpha = 1 - level.
double critical_value(double level, Alternative alt);

TestResult test_nested_implication(const PopNivDesign& design);
TestResult test_aco(const PopNivDesign& design, double kappa0, Alternative alt);
TestResult test_sw(const PopNivDesign& design, double lambda0, Alternative alt);
TestResult test_effect(std::span<const StratumObs> obs, Target which, double theta0,
                       Alternative alt);

enum class CiShape { Bounded, HalfLine, WholeLine, Disjoint };
enum class CiMethod { ClosedForm, FiellerQuadratic, GridFallback };

const char* to_string(CiShape s);
const char* to_string(CiMethod m);

struct ConfidenceInterval {
  double lower = 0.0;  // -inf allowed
  double upper = 0.0;  // +inf allowed
  double level = 0.95;
  CiShape shape = CiShape::Bounded;
  CiMethod method = CiMethod::ClosedForm;
  // Connected pieces in increasing order; two entries when Disjoint.
  std::vector<std::pair<double, double>> components;

  bool contains(double x) const;
  double length() const;
};

struct Estimate {
  double point = 0.0;
  double se = 0.0;  // sqrt(S^2); for ratios, S(point) / |mean b|
  ConfidenceInterval ci;
};

Estimate ci_proportion(const PopNivDesign& design, double level);
Estimate ci_compliance_rate(const PopNivDesign& design, Group g, double level);
Estimate ci_from_scores(std::span<const double> v, double level);

// Test inversion: {theta : the test at theta does not reject}.
Estimate fieller_interval(const AffineScores& s, double level, Alternative alt = Alternative::TwoSided);
Estimate invert_ci(const PopNivDesign& design, Target which, double level,
                   Alternative alt = Alternative::TwoSided);
Estimate invert_ci(std::span<const StratumObs> obs, Target which, double level,
                   Alternative alt = Alternative::TwoSided);

struct FullCohortEstimate {
  double point = 0.0;
  double se = 0.0;
  double weight_aco = 0.0;
  ConfidenceInterval ci;
};

// iota_a * kappa + (1 - iota_a) * lambda; delta-method variance with independent parts.
FullCohortEstimate extrapolated_full_cohort(const PopNivDesign& design, const Estimate& aco,
                                            const Estimate& sw, double level);
FullCohortEstimate combine_full_cohort(const Estimate& iota_a, const Estimate& aco,
                                       const Estimate& sw, double level);

}  // namespace niv
