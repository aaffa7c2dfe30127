#include "nested_iv/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nested_iv/errors.hpp"
#include "nested_iv/stats.hpp"

namespace niv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_gamma(double gamma) {
  if (!(gamma >= 1.0)) fail(ErrorCode::GammaBelowOne, "gamma must be >= 1");
}

struct OneSided {
  double d_bar = 0, se = 0, z = 0, p = 1;
};

OneSided one_sided(const AffineScores& s, double theta, double gamma, double sign) {
  std::vector<double> d(s.a.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = gamma_adjust(sign * (s.a[i] - theta * s.b[i]), gamma);
  auto mv = mean_and_s2(d);
  OneSided r;
  r.d_bar = mv.mean;
  r.se = std::sqrt(mv.s2);
  if (r.se > 0)
    r.z = r.d_bar / r.se;
  else
    r.z = r.d_bar == 0 ? 0.0 : (r.d_bar > 0 ? kInf : -kInf);
  r.p = normal_sf(r.z);
  return r;
}

// Nearest rejection boundary from an accepted start, moving in direction dir.
double boundary(const AffineScores& s, double start, double step, double dir, double gamma,
                double sign, double zcrit) {
  auto rejected = [&](double th) { return one_sided(s, th, gamma, sign).z >= zcrit; };
  double inside = start, outside = start;
  bool found = false;
  for (int k = 0; k < 64; ++k) {
    double cand = start + dir * step * std::ldexp(1.0, k);
    if (rejected(cand)) {
      outside = cand;
      found = true;
      break;
    }
    inside = cand;
  }
  if (!found) return dir * kInf;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (rejected(mid))
      outside = mid;
    else
      inside = mid;
  }
  return 0.5 * (inside + outside);
}

// Accepted set of one one-sided test, searched outward from the ratio estimate.
std::pair<double, double> accepted_range(const AffineScores& s, double gamma, double sign,
                                         double zcrit) {
  double bbar = 0, abar = 0;
  for (size_t i = 0; i < s.a.size(); ++i) {
    abar += s.a[i];
    bbar += s.b[i];
  }
  if (bbar == 0) return {-kInf, kInf};
  double center = abar / bbar;
  auto est = fieller_interval(s, 0.95);
  double step = est.se > 0 && std::isfinite(est.se) ? est.se : std::max(1.0, std::fabs(center));
  return {boundary(s, center, step, -1.0, gamma, sign, zcrit),
          boundary(s, center, step, +1.0, gamma, sign, zcrit)};
}

}  // namespace

GammaModel::GammaModel(double g) : gamma(g) { check_gamma(g); }

double stratum_tau_aco(const MatchedStratum& s, double kappa0) {
  const auto &t = s.treated(Group::A), &c = s.control(Group::A);
  return (t.r - kappa0 * t.d) - (c.r - kappa0 * c.d);
}

double stratum_tau_sw(const MatchedStratum& s, double lambda0) {
  const auto &tb = s.treated(Group::B), &cb = s.control(Group::B);
  double b = (tb.r - lambda0 * tb.d) - (cb.r - lambda0 * cb.d);
  return b - stratum_tau_aco(s, lambda0);
}

double gamma_adjust(double x, double gamma) {
  check_gamma(gamma);
  return x - ((gamma - 1) / (gamma + 1)) * std::fabs(x);
}

SensitivityResult sensitivity_test(std::span<const StratumObs> obs, Target which, double theta0,
                                   double gamma, Alternative alt, double level) {
  check_gamma(gamma);
  if (obs.size() < 2)
    fail(ErrorCode::TooFewStrata, "need at least 2 strata, have " + std::to_string(obs.size()));
  if (!(level > 0 && level < 1)) fail(ErrorCode::InvalidArgument, "level must lie in (0,1)");
  auto s = affine_scores(obs, which);

  SensitivityResult r;
  r.gamma = gamma;
  r.alternative = alt;
  r.level = level;
  double alpha = 1 - level;

  if (alt == Alternative::TwoSided) {
    double z = normal_quantile(1 - alpha / 2);
    auto g = one_sided(s, theta0, gamma, +1.0);
    auto l = one_sided(s, theta0, gamma, -1.0);
    const auto& pick = g.p <= l.p ? g : l;
    r.d_bar = pick.d_bar;
    r.se = pick.se;
    r.z_score = pick.z;
    r.p_value = std::min(1.0, 2 * std::min(g.p, l.p));
    r.reject = g.z >= z || l.z >= z;
    auto rg = accepted_range(s, gamma, +1.0, z);
    auto rl = accepted_range(s, gamma, -1.0, z);
    r.ci_lower = std::max(rg.first, rl.first);
    r.ci_upper = std::min(rg.second, rl.second);
    return r;
  }

  double sign = alt == Alternative::Greater ? 1.0 : -1.0;
  double z = normal_quantile(1 - alpha);
  auto o = one_sided(s, theta0, gamma, sign);
  r.d_bar = o.d_bar;
  r.se = o.se;
  r.z_score = o.z;
  r.p_value = o.p;
  r.reject = o.z >= z;
  auto range = accepted_range(s, gamma, sign, z);
  r.ci_lower = range.first;
  r.ci_upper = range.second;
  return r;
}

SensitivityResult sensitivity_test(const PopNivDesign& design, Target which, double theta0,
                                   double gamma, Alternative alt, double level) {
  auto obs = observe(design);
  return sensitivity_test(obs, which, theta0, gamma, alt, level);
}

GammaSweep gamma_sweep(std::span<const StratumObs> obs, Target which, double theta0,
                       const std::vector<double>& gammas, double level, Alternative alt) {
  GammaSweep out;
  for (size_t i = 0; i < gammas.size(); ++i) {
    check_gamma(gammas[i]);
    if (i > 0 && gammas[i] < gammas[i - 1])
      fail(ErrorCode::InvalidArgument, "gamma grid must be sorted ascending");
  }
  if (gammas.empty()) return out;
  for (double g : gammas) out.rows.push_back(sensitivity_test(obs, which, theta0, g, alt, level));

  auto rejects_at = [&](double g) { return sensitivity_test(obs, which, theta0, g, alt, level).reject; };
  if (!rejects_at(1.0)) {
    out.changepoint = 1.0;
  } else if (!rejects_at(kGammaSearchCap)) {
    double lo = 1.0, hi = kGammaSearchCap;
    while (hi - lo > 1e-3) {
      double mid = 0.5 * (lo + hi);
      if (rejects_at(mid))
        lo = mid;
      else
        hi = mid;
    }
    out.changepoint = 0.5 * (lo + hi);
  }
  return out;
}

GammaSweep gamma_sweep(const PopNivDesign& design, Target which, double theta0,
                       const std::vector<double>& gammas, double level, Alternative alt) {
  auto obs = observe(design);
  return gamma_sweep(obs, which, theta0, gammas, level, alt);
}

}  // namespace niv
