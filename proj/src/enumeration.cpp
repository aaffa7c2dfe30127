#include <cmath>
#include <limits>

#include "nested_iv/errors.hpp"
#include "nested_iv/simulation.hpp"

namespace niv {

namespace {

double score(const StratumObs& o, OracleStatistic which, double theta) {
  switch (which) {
    case OracleStatistic::Proportion: return (o.d_tb - o.d_cb) - (o.d_ta - o.d_ca);
    case OracleStatistic::ACO: return (o.r_ta - theta * o.d_ta) - (o.r_ca - theta * o.d_ca);
    case OracleStatistic::SW:
      return ((o.r_tb - theta * o.d_tb) - (o.r_cb - theta * o.d_cb)) -
             ((o.r_ta - theta * o.d_ta) - (o.r_ca - theta * o.d_ca));
  }
  return 0.0;
}

}  // namespace

double expected_score(const LatentStratum& s, OracleStatistic which, double theta0) {
  // Each unit lands on each of the four IV levels with probability 1/4.
  double sum = 0;
  for (const auto& u : s) {
    auto y = [&](IvLevel z) {
      return which == OracleStatistic::Proportion ? static_cast<double>(u.d_at(z))
                                                  : u.r_at(z) - theta0 * u.d_at(z);
    };
    double a = y(kTreatedA) - y(kControlA);
    double b = y(kTreatedB) - y(kControlB);
    switch (which) {
      case OracleStatistic::ACO: sum += a; break;
      case OracleStatistic::Proportion:
      case OracleStatistic::SW: sum += b - a; break;
    }
  }
  return sum / 4.0;
}

ExactDistribution enumeration_oracle(const SimulatedCohort& latent, OracleStatistic which,
                                     double theta0) {
  const int I = static_cast<int>(latent.strata.size());
  if (I < 1) fail(ErrorCode::InvalidArgument, "empty latent table");
  if (I > kMaxEnumerationStrata)
    fail(ErrorCode::TooLargeForEnumeration,
         std::to_string(I) + " strata exceed the enumeration limit of " +
             std::to_string(kMaxEnumerationStrata));

  std::vector<std::array<double, 8>> v(I);
  for (int i = 0; i < I; ++i)
    for (int c = 0; c < 8; ++c) v[i][c] = score(observe_stratum(latent.strata[i], c), which, theta0);

  ExactDistribution out;
  out.assignments = std::uint64_t{1} << (3 * I);
  out.values.reserve(out.assignments);
  std::vector<int> digit(I, 0);
  double s2_sum = 0;
  for (std::uint64_t n = 0; n < out.assignments; ++n) {
    for (int i = 0; i < I; ++i) digit[i] = static_cast<int>((n >> (3 * i)) & 7);
    double mean = 0;
    for (int i = 0; i < I; ++i) mean += v[i][digit[i]];
    mean /= I;
    if (I > 1) {
      double ss = 0;
      for (int i = 0; i < I; ++i) ss += (v[i][digit[i]] - mean) * (v[i][digit[i]] - mean);
      s2_sum += ss / (static_cast<double>(I) * (I - 1));
    }
    out.values.push_back(mean);
  }
  const double N = static_cast<double>(out.assignments);
  double m = 0;
  for (double x : out.values) m += x;
  out.mean = m / N;
  double var = 0;
  for (double x : out.values) var += (x - out.mean) * (x - out.mean);
  out.variance = var / N;
  out.mean_s2 = I > 1 ? s2_sum / N : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace niv
