#include "nested_iv/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <limits>

#include "nested_iv/errors.hpp"

namespace niv {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    fail(ErrorCode::InvalidArgument, "normal_quantile needs p in [0,1]");
  }
  // Acklam's rational approximation (relative error about 1e-9) ...
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double lo = 0.02425, hi = 1 - lo;
  double x;
  if (p < lo) {
    double q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= hi) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    double q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // ... followed by one Halley step against erfc.
  double e = (p < 0.5 ? normal_cdf(x) - p : (1 - p) - normal_sf(x));
  double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  x = x - u / (1 + x * u / 2);
  return x;
}

MeanVar mean_and_s2(std::span<const double> v) {
  MeanVar out;
  const double n = static_cast<double>(v.size());
  if (v.empty()) return out;
  double sum = 0;
  for (double x : v) sum += x;
  out.mean = sum / n;
  if (v.size() < 2) return out;
  double ss = 0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.s2 = ss / (n * (n - 1));
  return out;
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  AnovaResult out;
  double n = 0, total = 0;
  int k = 0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    ++k;
    n += static_cast<double>(g.size());
    for (double x : g) total += x;
  }
  if (k < 2 || n <= k) {
    out.degenerate = true;
    return out;
  }
  double grand = total / n;
  double ssb = 0, ssw = 0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    double m = 0;
    for (double x : g) m += x;
    m /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ssw += (x - m) * (x - m);
  }
  out.df_between = k - 1;
  out.df_within = n - k;
  if (ssw == 0 && ssb == 0) {
    out.degenerate = true;
    return out;
  }
  if (ssw == 0) {
    out.f = std::numeric_limits<double>::infinity();
    out.p_value = 0.0;
    return out;
  }
  out.f = (ssb / out.df_between) / (ssw / out.df_within);
  boost::math::fisher_f dist(out.df_between, out.df_within);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.f));
  return out;
}

ChiSquareResult chi_square_independence(const std::vector<std::vector<double>>& table) {
  ChiSquareResult out;
  std::vector<double> row_tot, col_tot;
  size_t ncol = 0;
  for (const auto& r : table) ncol = std::max(ncol, r.size());
  col_tot.assign(ncol, 0.0);
  for (const auto& r : table) {
    double s = 0;
    for (size_t j = 0; j < r.size(); ++j) {
      s += r[j];
      col_tot[j] += r[j];
    }
    row_tot.push_back(s);
  }
  double n = 0;
  for (double s : row_tot) n += s;
  int rows = 0, cols = 0;
  for (double s : row_tot) rows += s > 0;
  for (double s : col_tot) cols += s > 0;
  if (rows < 2 || cols < 2) {
    out.degenerate = true;
    return out;
  }
  for (size_t i = 0; i < table.size(); ++i) {
    if (row_tot[i] == 0) continue;
    for (size_t j = 0; j < ncol; ++j) {
      if (col_tot[j] == 0) continue;
      double obs = j < table[i].size() ? table[i][j] : 0.0;
      double expct = row_tot[i] * col_tot[j] / n;
      out.statistic += (obs - expct) * (obs - expct) / expct;
    }
  }
  out.df = static_cast<double>((rows - 1) * (cols - 1));
  boost::math::chi_squared dist(out.df);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

}  // namespace niv
