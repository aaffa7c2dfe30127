#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "nested_iv/errors.hpp"
#include "nested_iv/matching.hpp"

namespace niv {

const char* to_string(DistanceKind k) {
  switch (k) {
    case DistanceKind::RankMahalanobis: return "rank-mahalanobis";
    case DistanceKind::Euclidean: return "euclidean";
    case DistanceKind::Precomputed: return "precomputed";
  }
  return "?";
}

namespace {

// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<size_t> order(x.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Matrix metric_embedding(const std::vector<CovariateSchema>& schema,
                        const std::vector<ObservedUnit>& units, const DistanceSpec& spec) {
  if (spec.kind == DistanceKind::Precomputed)
    fail(ErrorCode::InvalidArgument, "precomputed distances are supplied directly to the network");
  auto rows = encode_covariates(schema, units, spec.covariate_subset, spec.encoding);
  const size_t n = rows.size();
  const size_t p = rows.empty() ? 0 : rows[0].size();
  if (p == 0) fail(ErrorCode::SchemaMismatch, "no covariates to match on");
  if (spec.kind == DistanceKind::Euclidean) return rows;

  if (!(spec.regularization > 0))
    fail(ErrorCode::InvalidArgument, "rank-Mahalanobis needs a positive regularization");
  Eigen::MatrixXd X(n, p);
  for (size_t j = 0; j < p; ++j) {
    std::vector<double> col(n);
    for (size_t i = 0; i < n; ++i) col[i] = rows[i][j];
    auto r = average_ranks(col);
    for (size_t i = 0; i < n; ++i) X(i, j) = r[i];
  }
  Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
  double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  Eigen::MatrixXd cov = (centered.adjoint() * centered) / denom;
  double mean_diag = cov.diagonal().mean();
  cov.diagonal().array() += spec.regularization * mean_diag;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    fail(ErrorCode::SingularCovariance, "regularized rank covariance is not invertible");

  // With cov = L L^T the Mahalanobis distance is Euclidean in L^{-1} x.
  Eigen::MatrixXd W = llt.matrixL().solve(X.transpose()).transpose();
  Matrix out(n, std::vector<double>(p));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < p; ++j) out[i][j] = W(i, j);
  return out;
}

double embedded_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

Matrix distance_matrix(const std::vector<CovariateSchema>& schema,
                       const std::vector<ObservedUnit>& units_x,
                       const std::vector<ObservedUnit>& units_y, const DistanceSpec& spec) {
  if (units_x.empty() || units_y.empty())
    fail(ErrorCode::InvalidArgument, "distance_matrix needs non-empty unit lists");

  // Pool x and y; a unit present on both sides is counted once.
  std::vector<ObservedUnit> pool;
  std::vector<size_t> ix(units_x.size()), iy(units_y.size());
  std::unordered_map<std::string, size_t> seen;
  auto add = [&](const ObservedUnit& u) {
    auto [it, fresh] = seen.emplace(u.unit_id, pool.size());
    if (fresh) pool.push_back(u);
    return it->second;
  };
  for (size_t i = 0; i < units_x.size(); ++i) ix[i] = add(units_x[i]);
  for (size_t i = 0; i < units_y.size(); ++i) iy[i] = add(units_y[i]);

  auto W = metric_embedding(schema, pool, spec);
  Matrix out(units_x.size(), std::vector<double>(units_y.size(), 0.0));
  for (size_t a = 0; a < units_x.size(); ++a)
    for (size_t b = 0; b < units_y.size(); ++b) out[a][b] = embedded_distance(W[ix[a]], W[iy[b]]);
  return out;
}

}  // namespace niv
