#include <cmath>
#include <vector>

#include "doctest.h"
#include "nested_iv/rng.hpp"
#include "nested_iv/stats.hpp"

using namespace niv;

// Reference values below were computed with scipy.stats.

TEST_CASE("normal distribution") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_cdf(-1.3) == doctest::Approx(0.09680048458561036).epsilon(1e-12));
  for (double p : {1e-10, 0.001, 0.02, 0.3, 0.5, 0.77, 0.99, 1 - 1e-9})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  CHECK(normal_sf(37.0) > 0.0);
  CHECK(normal_sf(-37.0) == 1.0);
}

TEST_CASE("mean and S^2") {
  std::vector<double> v = {1, 2, 3, 4};
  auto mv = mean_and_s2(v);
  CHECK(mv.mean == 2.5);
  // Sum of squares 5 over n (n - 1) = 12.
  CHECK(mv.s2 == doctest::Approx(5.0 / 12.0).epsilon(1e-15));
}

TEST_CASE("one-way ANOVA") {
  auto r = one_way_anova({{1.0, 2.0, 3.5, 4.0}, {2.5, 3.0, 5.0}, {0.5, 1.5, 2.0, 2.5, 6.0}, {4.0, 4.5}});
  CHECK(r.f == doctest::Approx(0.7070707070707071).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.5693907151056149).epsilon(1e-10));
  CHECK(r.df_between == 3);
  CHECK(r.df_within == 10);

  // Two groups with means 0 and 10, unit spread, 50 each.
  std::vector<double> a, b;
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    double e = rng.uniform() * 2 - 1;
    a.push_back(e);
    b.push_back(10 + e);
  }
  auto two = one_way_anova({a, b});
  // Reference F from the textbook sums of squares.
  double ma = 0, mb = 0;
  for (int i = 0; i < 50; ++i) {
    ma += a[i] / 50;
    mb += b[i] / 50;
  }
  double grand = (ma + mb) / 2, ssw = 0;
  for (int i = 0; i < 50; ++i) ssw += (a[i] - ma) * (a[i] - ma) + (b[i] - mb) * (b[i] - mb);
  double ssb = 50 * ((ma - grand) * (ma - grand) + (mb - grand) * (mb - grand));
  CHECK(two.f == doctest::Approx(ssb / (ssw / 98)).epsilon(1e-12));
  CHECK(two.p_value < 0.001);

  auto flat = one_way_anova({{1, 1}, {1, 1}});
  CHECK(flat.degenerate);
  auto separated = one_way_anova({{1, 1}, {2, 2}});
  CHECK(separated.p_value == 0.0);
}

TEST_CASE("chi-square test of independence") {
  auto r = chi_square_independence({{10, 20, 30}, {15, 15, 25}, {20, 10, 40}, {5, 25, 30}});
  CHECK(r.statistic == doctest::Approx(18.236363636363638).epsilon(1e-12));
  CHECK(r.df == 6);
  CHECK(r.p_value == doctest::Approx(0.005667876974935299).epsilon(1e-9));
  // Columns with no counts are dropped before the degrees of freedom are taken.
  auto z = chi_square_independence({{10, 0, 20}, {20, 0, 10}});
  CHECK(z.df == 1);
  CHECK(chi_square_independence({{5, 5}}).degenerate);
}

TEST_CASE("random streams") {
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  auto s1 = make_stream(1, 1, 0, 0), s2 = make_stream(1, 1, 0, 1), s3 = make_stream(1, 1, 1, 0);
  auto x1 = s1(), x2 = s2(), x3 = s3();
  CHECK(x1 != x2);
  CHECK(x1 != x3);
  Rng r(9);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) counts[r.below(3)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
}
