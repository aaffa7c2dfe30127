#pragma once

#include <span>
#include <vector>

namespace niv {

double normal_cdf(double x);
// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
// Inverse standard normal CDF, absolute error below 1e-9 on (0,1).
double normal_quantile(double p);

// Mean of the scores and S^2 = sum (v - mean)^2 / (n (n - 1)).
struct MeanVar {
  double mean = 0.0;
  double s2 = 0.0;
};
MeanVar mean_and_s2(std::span<const double> v);

struct AnovaResult {
  double f = 0.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

struct ChiSquareResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};
// Rows are groups, columns are categories; all-zero columns are dropped.
ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table);

}  // namespace niv
