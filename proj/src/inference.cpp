#include "nested_iv/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nested_iv/errors.hpp"
#include "nested_iv/stats.hpp"

namespace niv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sum_jk [Z^g f(u) - (1 - Z^g) f(u)] over the four units of a stratum.
template <class F>
double weighted_contrast(const MatchedStratum& s, Group g, F f) {
  auto zg = s.auxiliary_z(g);
  double v = 0;
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      double w = zg[2 * j + k];
      double x = f(s.units[j][k]);
      v += w * x - (1 - w) * x;
    }
  return v;
}

void require_strata(size_t n) {
  if (n < 2) fail(ErrorCode::TooFewStrata, "need at least 2 strata, have " + std::to_string(n));
}

}  // namespace

const char* to_string(Alternative a) {
  switch (a) {
    case Alternative::TwoSided: return "two-sided";
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
  }
  return "?";
}

const char* to_string(Target t) { return t == Target::ACO ? "aco" : "sw"; }

const char* to_string(CiShape s) {
  switch (s) {
    case CiShape::Bounded: return "Bounded";
    case CiShape::HalfLine: return "HalfLine";
    case CiShape::WholeLine: return "WholeLine";
    case CiShape::Disjoint: return "Disjoint";
  }
  return "?";
}

const char* to_string(CiMethod m) {
  switch (m) {
    case CiMethod::ClosedForm: return "ClosedForm";
    case CiMethod::FiellerQuadratic: return "FiellerQuadratic";
    case CiMethod::GridFallback: return "GridFallback";
  }
  return "?";
}

StratumObs observe(const MatchedStratum& s) {
  StratumObs o;
  const auto &ta = s.treated(Group::A), &ca = s.control(Group::A);
  const auto &tb = s.treated(Group::B), &cb = s.control(Group::B);
  o.r_ta = ta.r;
  o.r_ca = ca.r;
  o.r_tb = tb.r;
  o.r_cb = cb.r;
  o.d_ta = ta.d;
  o.d_ca = ca.d;
  o.d_tb = tb.d;
  o.d_cb = cb.d;
  return o;
}

std::vector<StratumObs> observe(const PopNivDesign& design) {
  std::vector<StratumObs> out;
  out.reserve(design.strata.size());
  for (const auto& s : design.strata) out.push_back(observe(s));
  return out;
}

std::vector<double> stratum_scores_proportion(const PopNivDesign& design) {
  std::vector<double> v;
  auto d = [](const ObservedUnit& u) { return static_cast<double>(u.d); };
  for (const auto& s : design.strata)
    v.push_back(weighted_contrast(s, Group::B, d) - weighted_contrast(s, Group::A, d));
  return v;
}

std::vector<double> stratum_scores_compliance(const PopNivDesign& design, Group g) {
  std::vector<double> v;
  auto d = [](const ObservedUnit& u) { return static_cast<double>(u.d); };
  // One complying pair per stratum, so dividing by 1 already gives the rate scale.
  for (const auto& s : design.strata) v.push_back(weighted_contrast(s, g, d));
  return v;
}

std::vector<double> stratum_scores_aco(const PopNivDesign& design, double kappa0) {
  std::vector<double> v;
  auto y = [kappa0](const ObservedUnit& u) { return u.r - kappa0 * u.d; };
  for (const auto& s : design.strata) v.push_back(weighted_contrast(s, Group::A, y));
  return v;
}

std::vector<double> stratum_scores_sw(const PopNivDesign& design, double lambda0) {
  std::vector<double> v;
  auto y = [lambda0](const ObservedUnit& u) { return u.r - lambda0 * u.d; };
  for (const auto& s : design.strata)
    v.push_back(weighted_contrast(s, Group::B, y) - weighted_contrast(s, Group::A, y));
  return v;
}

std::vector<double> AffineScores::at(double theta) const {
  std::vector<double> v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i] - theta * b[i];
  return v;
}

AffineScores affine_scores(std::span<const StratumObs> obs, Target which) {
  AffineScores s;
  s.a.reserve(obs.size());
  s.b.reserve(obs.size());
  for (const auto& o : obs) {
    double ra = o.r_ta - o.r_ca, da = o.d_ta - o.d_ca;
    if (which == Target::ACO) {
      s.a.push_back(ra);
      s.b.push_back(da);
    } else {
      s.a.push_back((o.r_tb - o.r_cb) - ra);
      s.b.push_back((o.d_tb - o.d_cb) - da);
    }
  }
  return s;
}

double critical_value(double level, Alternative alt) {
  if (!(level > 0 && level < 1)) fail(ErrorCode::InvalidArgument, "level must lie in (0,1)");
  double alpha = 1 - level;
  return normal_quantile(alt == Alternative::TwoSided ? 1 - alpha / 2 : 1 - alpha);
}

TestResult z_test(std::span<const double> v, double c, Alternative alt) {
  require_strata(v.size());
  auto mv = mean_and_s2(v);
  TestResult t;
  t.statistic = mv.mean;
  t.se = std::sqrt(mv.s2);
  t.alternative = alt;
  t.hypothesized_value = c;
  double diff = mv.mean - c;
  if (t.se > 0)
    t.z_score = diff / t.se;
  else
    t.z_score = diff == 0 ? 0.0 : (diff > 0 ? kInf : -kInf);
  switch (alt) {
    case Alternative::TwoSided: t.p_value = std::min(1.0, 2 * normal_sf(std::fabs(t.z_score))); break;
    case Alternative::Greater: t.p_value = normal_sf(t.z_score); break;
    case Alternative::Less: t.p_value = normal_cdf(t.z_score); break;
  }
  return t;
}

bool rejects(const TestResult& t, double level) {
  double z = critical_value(level, t.alternative);
  switch (t.alternative) {
    case Alternative::TwoSided: return std::fabs(t.z_score) >= z;
    case Alternative::Greater: return t.z_score >= z;
    case Alternative::Less: return t.z_score <= -z;
  }
  return false;
}

TestResult test_nested_implication(const PopNivDesign& design) {
  auto v = stratum_scores_proportion(design);
  return z_test(v, 0.0, Alternative::Less);
}

TestResult test_aco(const PopNivDesign& design, double kappa0, Alternative alt) {
  auto t = z_test(stratum_scores_aco(design, kappa0), 0.0, alt);
  t.hypothesized_value = kappa0;
  return t;
}

TestResult test_sw(const PopNivDesign& design, double lambda0, Alternative alt) {
  auto t = z_test(stratum_scores_sw(design, lambda0), 0.0, alt);
  t.hypothesized_value = lambda0;
  return t;
}

TestResult test_effect(std::span<const StratumObs> obs, Target which, double theta0,
                       Alternative alt) {
  auto t = z_test(affine_scores(obs, which).at(theta0), 0.0, alt);
  t.hypothesized_value = theta0;
  return t;
}

bool ConfidenceInterval::contains(double x) const {
  for (const auto& [lo, hi] : components)
    if (x >= lo && x <= hi) return true;
  return false;
}

double ConfidenceInterval::length() const {
  double len = 0;
  for (const auto& [lo, hi] : components) len += hi - lo;
  return len;
}

Estimate ci_from_scores(std::span<const double> v, double level) {
  require_strata(v.size());
  auto mv = mean_and_s2(v);
  double z = critical_value(level, Alternative::TwoSided);
  Estimate e;
  e.point = mv.mean;
  e.se = std::sqrt(mv.s2);
  e.ci.level = level;
  e.ci.method = CiMethod::ClosedForm;
  e.ci.shape = CiShape::Bounded;
  e.ci.lower = mv.mean - z * e.se;
  e.ci.upper = mv.mean + z * e.se;
  e.ci.components = {{e.ci.lower, e.ci.upper}};
  return e;
}

Estimate ci_proportion(const PopNivDesign& design, double level) {
  auto v = stratum_scores_proportion(design);
  return ci_from_scores(v, level);
}

Estimate ci_compliance_rate(const PopNivDesign& design, Group g, double level) {
  auto v = stratum_scores_compliance(design, g);
  return ci_from_scores(v, level);
}

namespace {

struct Moments {
  double abar = 0, bbar = 0, saa = 0, sab = 0, sbb = 0;  // S-scaled (divided by I(I-1))
};

Moments moments(const AffineScores& s) {
  Moments m;
  const double n = static_cast<double>(s.a.size());
  for (size_t i = 0; i < s.a.size(); ++i) {
    m.abar += s.a[i];
    m.bbar += s.b[i];
  }
  m.abar /= n;
  m.bbar /= n;
  for (size_t i = 0; i < s.a.size(); ++i) {
    double da = s.a[i] - m.abar, db = s.b[i] - m.bbar;
    m.saa += da * da;
    m.sab += da * db;
    m.sbb += db * db;
  }
  double k = n * (n - 1);
  m.saa /= k;
  m.sab /= k;
  m.sbb /= k;
  return m;
}

// The test at theta fails to reject.
bool accepts(const Moments& m, double theta, double z, Alternative alt) {
  double t = m.abar - theta * m.bbar;
  double s2 = m.saa - 2 * theta * m.sab + theta * theta * m.sbb;
  double s = std::sqrt(std::max(s2, 0.0));
  if (s == 0) return t == 0;
  double zt = t / s;
  switch (alt) {
    case Alternative::TwoSided: return std::fabs(zt) < z;
    case Alternative::Greater: return zt < z;
    case Alternative::Less: return zt > -z;
  }
  return false;
}

void classify(ConfidenceInterval& ci) {
  if (ci.components.empty()) return;
  ci.lower = ci.components.front().first;
  ci.upper = ci.components.back().second;
  if (ci.components.size() > 1) {
    ci.shape = CiShape::Disjoint;
  } else if (std::isinf(ci.lower) && std::isinf(ci.upper)) {
    ci.shape = CiShape::WholeLine;
  } else if (std::isinf(ci.lower) || std::isinf(ci.upper)) {
    ci.shape = CiShape::HalfLine;
  } else {
    ci.shape = CiShape::Bounded;
  }
}

// Evaluates acceptance between sorted breakpoints and merges accepted segments.
std::vector<std::pair<double, double>> segments(const Moments& m, std::vector<double> bps,
                                                double z, Alternative alt) {
  std::sort(bps.begin(), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  std::vector<std::pair<double, double>> out;
  auto push = [&](double lo, double hi) {
    if (!out.empty() && out.back().second == lo)
      out.back().second = hi;
    else
      out.push_back({lo, hi});
  };
  if (bps.empty()) {
    if (accepts(m, 0.0, z, alt)) push(-kInf, kInf);
    return out;
  }
  auto probe_out = [](double x) { return std::max(1.0, std::fabs(x)); };
  if (accepts(m, bps.front() - probe_out(bps.front()), z, alt)) push(-kInf, bps.front());
  for (size_t i = 0; i + 1 < bps.size(); ++i)
    if (accepts(m, 0.5 * (bps[i] + bps[i + 1]), z, alt)) push(bps[i], bps[i + 1]);
  if (accepts(m, bps.back() + probe_out(bps.back()), z, alt)) push(bps.back(), kInf);
  return out;
}

std::vector<std::pair<double, double>> grid_segments(const Moments& m, double center, double z,
                                                     Alternative alt) {
  const int n = 10000;
  double half = 10 * std::max(std::fabs(center), 1.0);
  double lo = center - half, step = 2 * half / (n - 1);
  std::vector<char> acc(n);
  for (int i = 0; i < n; ++i) acc[i] = accepts(m, lo + i * step, z, alt);
  auto refine = [&](double x0, double x1) {
    bool a0 = accepts(m, x0, z, alt);
    for (int it = 0; it < 200 && x1 - x0 > 1e-14 * std::max(1.0, std::fabs(x0)); ++it) {
      double mid = 0.5 * (x0 + x1);
      if (accepts(m, mid, z, alt) == a0)
        x0 = mid;
      else
        x1 = mid;
    }
    return 0.5 * (x0 + x1);
  };
  std::vector<std::pair<double, double>> out;
  double start = acc[0] ? -kInf : 0.0;
  for (int i = 1; i < n; ++i) {
    if (acc[i] == acc[i - 1]) continue;
    double edge = refine(lo + (i - 1) * step, lo + i * step);
    if (acc[i])
      start = edge;
    else
      out.push_back({start, edge});
  }
  if (acc[n - 1]) out.push_back({start, kInf});
  return out;
}

}  // namespace

Estimate fieller_interval(const AffineScores& s, double level, Alternative alt) {
  require_strata(s.a.size());
  Moments m = moments(s);
  if (m.bbar == 0)
    fail(ErrorCode::UndefinedEstimand, "mean IV effect on treatment received is zero");
  double z = critical_value(level, alt);

  Estimate e;
  e.point = m.abar / m.bbar;
  double s2_point = m.saa - 2 * e.point * m.sab + e.point * e.point * m.sbb;
  e.se = std::sqrt(std::max(s2_point, 0.0)) / std::fabs(m.bbar);
  e.ci.level = level;

  // T(theta)^2 - z^2 S^2(theta) = A theta^2 + B theta + C.
  double A = m.bbar * m.bbar - z * z * m.sbb;
  double B = -2 * (m.abar * m.bbar - z * z * m.sab);
  double C = m.abar * m.abar - z * z * m.saa;

  if (std::fabs(A) < 1e-12) {
    e.ci.method = CiMethod::GridFallback;
    e.ci.components = grid_segments(m, e.point, z, alt);
  } else {
    e.ci.method = CiMethod::FiellerQuadratic;
    std::vector<double> bps{e.point};
    double disc = B * B - 4 * A * C;
    if (disc >= 0) {
      double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
      if (q != 0) {
        bps.push_back(q / A);
        bps.push_back(C / q);
      } else {
        bps.push_back(0.0);
      }
    }
    e.ci.components = segments(m, bps, z, alt);
  }
  if (e.ci.components.empty()) e.ci.components = {{e.point, e.point}};
  classify(e.ci);
  return e;
}

Estimate invert_ci(std::span<const StratumObs> obs, Target which, double level, Alternative alt) {
  return fieller_interval(affine_scores(obs, which), level, alt);
}

Estimate invert_ci(const PopNivDesign& design, Target which, double level, Alternative alt) {
  auto obs = observe(design);
  return invert_ci(obs, which, level, alt);
}

FullCohortEstimate combine_full_cohort(const Estimate& iota_a, const Estimate& aco,
                                       const Estimate& sw, double level) {
  FullCohortEstimate f;
  double w = iota_a.point;
  f.weight_aco = w;
  f.point = w * aco.point + (1 - w) * sw.point;
  double diff = aco.point - sw.point;
  double var = w * w * aco.se * aco.se + (1 - w) * (1 - w) * sw.se * sw.se +
               diff * diff * iota_a.se * iota_a.se;
  f.se = std::sqrt(var);
  double z = critical_value(level, Alternative::TwoSided);
  f.ci.level = level;
  f.ci.method = CiMethod::ClosedForm;
  f.ci.lower = f.point - z * f.se;
  f.ci.upper = f.point + z * f.se;
  f.ci.components = {{f.ci.lower, f.ci.upper}};
  f.ci.shape = CiShape::Bounded;
  return f;
}

FullCohortEstimate extrapolated_full_cohort(const PopNivDesign& design, const Estimate& aco,
                                            const Estimate& sw, double level) {
  return combine_full_cohort(ci_compliance_rate(design, Group::A, level), aco, sw, level);
}

}  // namespace niv
