#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nested_iv/data_model.hpp"
#include "nested_iv/inference.hpp"

namespace niv {

struct GammaModel {
  double gamma = 1.0;

  explicit GammaModel(double g);
  // Bounds on the probability that the first pair receives group a (A_i = 1).
  double pi_lower() const { return 1.0 / (1.0 + gamma); }
  double pi_upper() const { return gamma / (1.0 + gamma); }
};

// Treated-minus-control (R - kappa0 D) contrast in the group-a pair.
double stratum_tau_aco(const MatchedStratum& s, double kappa0);
// Group-b contrast minus group-a contrast of (R - lambda0 D).
double stratum_tau_sw(const MatchedStratum& s, double lambda0);

// f(x) = x - ((gamma - 1) / (gamma + 1)) |x|.
double gamma_adjust(double x, double gamma);

struct SensitivityResult {
  double gamma = 1.0;
  double d_bar = 0.0;
  double se = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  bool reject = false;
  Alternative alternative = Alternative::Greater;
  double level = 0.95;
};

// Greater: reject when mean f(tau) / S >= z_{1-alpha}. Less negates every tau first.
// TwoSided runs both one-sided tests at alpha/2 (Bonferroni).
SensitivityResult sensitivity_test(std::span<const StratumObs> obs, Target which, double theta0,
                                   double gamma, Alternative alt = Alternative::Greater,
                                   double level = 0.95);
SensitivityResult sensitivity_test(const PopNivDesign& design, Target which, double theta0,
                                   double gamma, Alternative alt = Alternative::Greater,
                                   double level = 0.95);

struct GammaSweep {
  std::vector<SensitivityResult> rows;
  // Smallest gamma at which the decision at theta0 flips to "fail to reject";
  // empty when the test still rejects at the search cap.
  std::optional<double> changepoint;
};

inline constexpr double kGammaSearchCap = 20.0;

GammaSweep gamma_sweep(std::span<const StratumObs> obs, Target which, double theta0,
                       const std::vector<double>& gammas, double level,
                       Alternative alt = Alternative::Greater);
GammaSweep gamma_sweep(const PopNivDesign& design, Target which, double theta0,
                       const std::vector<double>& gammas, double level,
                       Alternative alt = Alternative::Greater);

}  // namespace niv
