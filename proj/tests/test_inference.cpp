#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "nested_iv/errors.hpp"
#include "nested_iv/inference.hpp"
#include "nested_iv/stats.hpp"

using namespace niv;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Internal;
}

// Pair 1 holds group a (treated first), pair 2 holds group b (treated first).
MatchedStratum stratum(const StratumObs& o, int id) {
  MatchedStratum s;
  s.stratum_id = id;
  const IvLevel z[4] = {kTreatedA, kControlA, kTreatedB, kControlB};
  const double d[4] = {o.d_ta, o.d_ca, o.d_tb, o.d_cb};
  const double r[4] = {o.r_ta, o.r_ca, o.r_tb, o.r_cb};
  for (int p = 0; p < 4; ++p) {
    auto& u = s.units[p / 2][p % 2];
    u.unit_id = "s" + std::to_string(id) + "u" + std::to_string(p);
    u.z = z[p];
    u.d = static_cast<int>(d[p]);
    u.r = r[p];
  }
  return s;
}

PopNivDesign design_of(const std::vector<StratumObs>& obs) {
  PopNivDesign d;
  for (size_t i = 0; i < obs.size(); ++i) d.strata.push_back(stratum(obs[i], static_cast<int>(i)));
  return d;
}

StratumObs with_d(double ta, double ca, double tb, double cb) {
  StratumObs o;
  o.d_ta = ta;
  o.d_ca = ca;
  o.d_tb = tb;
  o.d_cb = cb;
  return o;
}

std::vector<StratumObs> random_obs(std::mt19937_64& gen, int n, double p_comply) {
  std::bernoulli_distribution comply(p_comply), coin(0.5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<StratumObs> out(n);
  for (auto& o : out) {
    o.d_ta = comply(gen);
    o.d_ca = 0;
    o.d_tb = comply(gen) || coin(gen);
    o.d_cb = 0;
    o.r_ta = noise(gen) + 0.3 * o.d_ta;
    o.r_ca = noise(gen);
    o.r_tb = noise(gen) + 0.3 * o.d_tb;
    o.r_cb = noise(gen);
  }
  return out;
}

// Every grid point must be inside the interval exactly when the test fails to reject.
void check_duality(std::span<const StratumObs> obs, Target which, const Estimate& e, double level,
                   Alternative alt, double lo, double hi) {
  for (int g = 0; g < 50; ++g) {
    double theta = lo + (hi - lo) * g / 49.0;
    auto t = test_effect(obs, which, theta, alt);
    CHECK_MESSAGE(e.ci.contains(theta) == !rejects(t, level), "theta = " << theta);
  }
}

}  // namespace

TEST_CASE("proportion scores by hand") {
  auto d = design_of({with_d(1, 0, 1, 0)});
  CHECK(stratum_scores_proportion(d)[0] == 0.0);
  d = design_of({with_d(0, 0, 1, 0)});
  CHECK(stratum_scores_proportion(d)[0] == 1.0);

  // Swapping pair positions leaves the score unchanged.
  MatchedStratum s = stratum(with_d(0, 0, 1, 0), 0);
  std::swap(s.units[0], s.units[1]);
  PopNivDesign swapped;
  swapped.strata = {s};
  CHECK(stratum_scores_proportion(swapped)[0] == 1.0);
}

TEST_CASE("proportion interval") {
  // V = {0, 2}: mean 1, S^2 = 2 / (2 * 1) = 1.
  auto d = design_of({with_d(0, 0, 0, 0), with_d(0, 1, 1, 0)});
  auto e = ci_proportion(d, 0.95);
  CHECK(e.point == 1.0);
  CHECK(e.se == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(e.ci.lower == doctest::Approx(1 - 1.959963984540054).epsilon(1e-12));
  CHECK(e.ci.upper == doctest::Approx(1 + 1.959963984540054).epsilon(1e-12));
  CHECK(e.ci.method == CiMethod::ClosedForm);
  CHECK(e.ci.shape == CiShape::Bounded);

  auto same = ci_proportion(design_of({with_d(0, 0, 1, 0), with_d(0, 0, 1, 0), with_d(0, 0, 1, 0)}), 0.9);
  CHECK(same.point == 1.0);
  CHECK(same.ci.lower == 1.0);
  CHECK(same.ci.upper == 1.0);

  CHECK(code_of([] { ci_proportion(design_of({with_d(0, 0, 1, 0)}), 0.95); }) ==
        ErrorCode::TooFewStrata);
  CHECK(code_of([&] { ci_proportion(d, 1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("compliance rates") {
  auto d = design_of({with_d(1, 0, 1, 0), with_d(1, 0, 1, 0)});
  CHECK(ci_compliance_rate(d, Group::A, 0.95).point == 1.0);
  CHECK(ci_compliance_rate(d, Group::B, 0.95).point == 1.0);
  d = design_of({with_d(0, 0, 1, 0), with_d(1, 0, 1, 0), with_d(0, 0, 0, 0), with_d(1, 0, 1, 0)});
  CHECK(ci_compliance_rate(d, Group::A, 0.95).point == 0.5);
  CHECK(ci_compliance_rate(d, Group::B, 0.95).point == 0.75);
  CHECK(ci_proportion(d, 0.95).point == 0.25);
}

TEST_CASE("testable implication") {
  // iota_b - iota_a = 0 exactly, with spread.
  auto d = design_of({with_d(0, 0, 1, 0), with_d(1, 0, 0, 0)});
  auto t = test_nested_implication(d);
  CHECK(t.statistic == 0.0);
  CHECK(t.z_score == 0.0);
  CHECK(t.p_value == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<StratumObs> obs;
  for (int i = 0; i < 40; ++i) obs.push_back(with_d(i % 3 == 0, 0, 1, 0));
  t = test_nested_implication(design_of(obs));
  CHECK(t.statistic > 0);
  CHECK(t.p_value > 0.999);

  obs.clear();
  for (int i = 0; i < 40; ++i) obs.push_back(with_d(1, 0, i % 3 == 0, 0));
  CHECK(test_nested_implication(design_of(obs)).p_value < 0.001);
}

TEST_CASE("effect tests at the exact null") {
  std::vector<StratumObs> obs;
  const double kappa0 = 0.4;
  for (int i = 0; i < 5; ++i) {
    auto o = with_d(i % 2, 0, 1, i == 3);
    o.r_ta = kappa0 * o.d_ta;
    o.r_ca = kappa0 * o.d_ca;
    o.r_tb = kappa0 * o.d_tb;
    o.r_cb = kappa0 * o.d_cb;
    obs.push_back(o);
  }
  auto d = design_of(obs);
  auto t = test_aco(d, kappa0, Alternative::TwoSided);
  CHECK(t.statistic == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(t.p_value == doctest::Approx(1.0));
  CHECK(t.hypothesized_value == kappa0);

  auto zero = design_of({with_d(0, 0, 0, 0), with_d(0, 0, 0, 0), with_d(0, 0, 0, 0)});
  for (double l : {-3.0, 0.0, 2.5}) {
    auto s = test_sw(zero, l, Alternative::TwoSided);
    CHECK(s.statistic == 0.0);
    CHECK(s.p_value == 1.0);
  }
}

TEST_CASE("design scores agree with the affine form") {
  std::mt19937_64 gen(3);
  auto obs = random_obs(gen, 12, 0.6);
  auto d = design_of(obs);
  for (double th : {-1.0, 0.0, 0.7}) {
    auto aco = stratum_scores_aco(d, th);
    auto sw = stratum_scores_sw(d, th);
    auto fa = affine_scores(obs, Target::ACO).at(th);
    auto fs = affine_scores(obs, Target::SW).at(th);
    for (size_t i = 0; i < obs.size(); ++i) {
      CHECK(aco[i] == doctest::Approx(fa[i]).epsilon(1e-14));
      CHECK(sw[i] == doctest::Approx(fs[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("ACO statistic is affine in kappa") {
  std::mt19937_64 gen(5);
  auto obs = random_obs(gen, 9, 0.5);
  auto d = design_of(obs);
  double slope = 0;
  for (const auto& o : obs) slope -= (o.d_ta - o.d_ca) / obs.size();
  double t0 = test_aco(d, 0.0, Alternative::TwoSided).statistic;
  for (double k : {-2.0, 0.5, 3.0})
    CHECK(test_aco(d, k, Alternative::TwoSided).statistic == doctest::Approx(t0 + slope * k).epsilon(1e-12));
}

TEST_CASE("Fieller interval with a fixed denominator is the Wald interval") {
  AffineScores s{{0.0, 2.0}, {1.0, 1.0}};
  auto e = fieller_interval(s, 0.95);
  CHECK(e.point == 1.0);
  CHECK(e.ci.method == CiMethod::FiellerQuadratic);
  CHECK(e.ci.shape == CiShape::Bounded);
  CHECK(e.ci.lower == doctest::Approx(1 - 1.959963984540054).epsilon(1e-12));
  CHECK(e.ci.upper == doctest::Approx(1 + 1.959963984540054).epsilon(1e-12));
}

TEST_CASE("Fieller interval matches the quadratic roots") {
  AffineScores s{{0.2, 0.5, 0.1, 0.6, 0.3}, {1.0, 0.8, 1.0, 0.9, 1.0}};
  auto e = fieller_interval(s, 0.95);
  // Moments scaled by 1 / (I (I - 1)).
  double n = 5, abar = 0, bbar = 0, saa = 0, sab = 0, sbb = 0;
  for (int i = 0; i < 5; ++i) {
    abar += s.a[i] / n;
    bbar += s.b[i] / n;
  }
  for (int i = 0; i < 5; ++i) {
    saa += (s.a[i] - abar) * (s.a[i] - abar) / (n * (n - 1));
    sab += (s.a[i] - abar) * (s.b[i] - bbar) / (n * (n - 1));
    sbb += (s.b[i] - bbar) * (s.b[i] - bbar) / (n * (n - 1));
  }
  double z = 1.959963984540054;
  double A = bbar * bbar - z * z * sbb, B = -2 * (abar * bbar - z * z * sab), C = abar * abar - z * z * saa;
  double r1 = (-B - std::sqrt(B * B - 4 * A * C)) / (2 * A);
  double r2 = (-B + std::sqrt(B * B - 4 * A * C)) / (2 * A);
  CHECK(e.ci.shape == CiShape::Bounded);
  CHECK(e.point == doctest::Approx(abar / bbar).epsilon(1e-14));
  CHECK(e.ci.lower == doctest::Approx(std::min(r1, r2)).epsilon(1e-10));
  CHECK(e.ci.upper == doctest::Approx(std::max(r1, r2)).epsilon(1e-10));
  CHECK(e.ci.contains(e.point));
}

TEST_CASE("weak instruments give unbounded intervals") {
  AffineScores s{{1.0, -1.0, 0.5, -0.2}, {1.0, -1.0, 1.0, -0.9}};
  auto e = fieller_interval(s, 0.95);
  CHECK(e.ci.shape != CiShape::Bounded);
  CHECK(std::isinf(e.ci.length()));

  AffineScores zero{{1.0, 2.0}, {1.0, -1.0}};
  CHECK(code_of([&] { fieller_interval(zero, 0.95); }) == ErrorCode::UndefinedEstimand);
}

TEST_CASE("Fieller shapes on constructed data") {
  // A > 0: bounded.
  AffineScores bounded{{1.0, 1.2, 0.9, 1.1}, {1.0, 1.0, 1.0, 1.0}};
  CHECK(fieller_interval(bounded, 0.95).ci.shape == CiShape::Bounded);
  // A < 0 with real roots and the point estimate in an outer ray: two rays.
  AffineScores disjoint{{2.0, 0.0, 1.5, 0.3}, {1.0, -0.6, 0.9, -0.5}};
  auto d = fieller_interval(disjoint, 0.95);
  CHECK(d.ci.shape == CiShape::Disjoint);
  REQUIRE(d.ci.components.size() == 2);
  CHECK(std::isinf(d.ci.components.front().first));
  CHECK(std::isinf(d.ci.components.back().second));
}

TEST_CASE("CI/test duality on grids") {
  std::mt19937_64 gen(17);
  for (int rep = 0; rep < 30; ++rep) {
    auto obs = random_obs(gen, 6 + rep, 0.2 + 0.02 * rep);
    for (Target which : {Target::ACO, Target::SW}) {
      auto s = affine_scores(obs, which);
      double bsum = 0;
      for (double b : s.b) bsum += b;
      if (bsum == 0) continue;
      for (Alternative alt : {Alternative::TwoSided, Alternative::Greater, Alternative::Less}) {
        auto e = invert_ci(obs, which, 0.9, alt);
        check_duality(obs, which, e, 0.9, alt, e.point - 5, e.point + 5);
      }
    }
  }
}

TEST_CASE("grid fallback when the leading coefficient vanishes") {
  // bbar = 1 and S_bb = 1, so A = 1 - z^2 = 0 at z = 1.
  AffineScores s{{0.3, 1.1}, {0.0, 2.0}};
  double level = 2 * normal_cdf(1.0) - 1;
  auto e = fieller_interval(s, level);
  CHECK(e.ci.method == CiMethod::GridFallback);
  std::vector<StratumObs> obs(2);
  for (int i = 0; i < 2; ++i) {
    obs[i].r_ta = s.a[i];
    obs[i].d_ta = s.b[i];
  }
  for (int g = 0; g < 50; ++g) {
    double theta = e.point - 5 + 10 * g / 49.0;
    // Points within the bisection tolerance of an edge are skipped.
    bool near_edge = false;
    for (const auto& [lo, hi] : e.ci.components)
      near_edge = near_edge || std::fabs(theta - lo) < 1e-9 || std::fabs(theta - hi) < 1e-9;
    if (near_edge) continue;
    auto t = test_effect(obs, Target::ACO, theta, Alternative::TwoSided);
    CHECK(e.ci.contains(theta) == !rejects(t, level));
  }
}

TEST_CASE("full cohort extrapolation") {
  Estimate iota{1.0, 0.0, {}}, aco{0.02, 0.01, {}}, sw{-0.4, 0.3, {}};
  auto f = combine_full_cohort(iota, aco, sw, 0.95);
  CHECK(f.point == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(f.se == doctest::Approx(0.01).epsilon(1e-15));

  Estimate half{0.5, 0.1, {}}, zero{0.0, 0.2, {}};
  auto g = combine_full_cohort(half, zero, zero, 0.95);
  CHECK(g.point == 0.0);
  CHECK(g.se == doctest::Approx(std::sqrt(0.25 * 0.04 + 0.25 * 0.04)).epsilon(1e-15));
  CHECK(g.ci.contains(0.0));

  // Delta method with all three parts.
  Estimate ia{0.6, 0.05, {}}, k{0.1, 0.02, {}}, l{0.3, 0.04, {}};
  auto h = combine_full_cohort(ia, k, l, 0.95);
  CHECK(h.point == doctest::Approx(0.6 * 0.1 + 0.4 * 0.3).epsilon(1e-14));
  double var = 0.36 * 0.0004 + 0.16 * 0.0016 + 0.04 * 0.0025;
  CHECK(h.se == doctest::Approx(std::sqrt(var)).epsilon(1e-14));
}
