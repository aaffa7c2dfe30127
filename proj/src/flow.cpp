#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

#include "nested_iv/errors.hpp"
#include "nested_iv/matching.hpp"

namespace niv {

namespace {

const char* kArmNames[4] = {"T_a", "C_a", "T_b", "C_b"};

std::int64_t scale_cost(double d, std::int64_t scale) {
  if (!std::isfinite(d) || d < 0)
    fail(ErrorCode::InvalidArgument, "edge costs must be finite and non-negative");
  return std::llround(d * static_cast<double>(scale));
}

// Residual graph for successive shortest paths.
struct Residual {
  std::vector<int> to, cap;
  std::vector<std::int64_t> cost;
  std::vector<std::vector<int>> adj;

  explicit Residual(int n) : adj(n) {}

  int add(int u, int v, int c, std::int64_t w) {
    int id = static_cast<int>(to.size());
    to.push_back(v);
    cap.push_back(c);
    cost.push_back(w);
    adj[u].push_back(id);
    to.push_back(u);
    cap.push_back(0);
    cost.push_back(-w);
    adj[v].push_back(id + 1);
    return id;
  }
};

}  // namespace

std::array<std::vector<ObservedUnit>, 4> partition_arms(const std::vector<ObservedUnit>& units) {
  std::array<std::vector<ObservedUnit>, 4> arms;
  for (const auto& u : units) arms[arm_index(u.z)].push_back(u);
  return arms;
}

FlowNetwork build_network_from_costs(std::array<std::vector<ObservedUnit>, 4> arms,
                                     const Matrix& ta_ca, const Matrix& ca_tb,
                                     const Matrix& tb_cb, std::optional<int> num_strata,
                                     std::int64_t cost_scale) {
  for (int a = 0; a < 4; ++a)
    if (arms[a].empty()) fail(ErrorCode::EmptyArm, std::string("arm ") + kArmNames[a] + " is empty");
  if (cost_scale <= 0) fail(ErrorCode::InvalidArgument, "cost scale must be positive");
  size_t min_arm = arms[0].size();
  for (const auto& a : arms) min_arm = std::min(min_arm, a.size());
  int I = num_strata ? *num_strata : static_cast<int>(min_arm);
  if (I < 1 || static_cast<size_t>(I) > min_arm)
    fail(ErrorCode::InfeasibleStrataCount, "I = " + std::to_string(I) +
                                               " must lie in [1, " + std::to_string(min_arm) + "]");

  auto check = [&](const Matrix& m, int r, int c, const char* name) {
    if (m.size() != arms[r].size())
      fail(ErrorCode::InvalidArgument, std::string(name) + " has the wrong number of rows");
    for (const auto& row : m)
      if (row.size() != arms[c].size())
        fail(ErrorCode::InvalidArgument, std::string(name) + " has the wrong number of columns");
  };
  check(ta_ca, 0, 1, "T_a x C_a costs");
  check(ca_tb, 1, 2, "C_a x T_b costs");
  check(tb_cb, 2, 3, "T_b x C_b costs");

  FlowNetwork net;
  net.supply = I;
  net.cost_scale = cost_scale;
  net.spec.kind = DistanceKind::Precomputed;
  int next = 1;
  for (int a = 0; a < 4; ++a)
    for (size_t i = 0; i < arms[a].size(); ++i) net.layers[a].push_back(next++);
  net.sink = next;
  net.arms = std::move(arms);

  auto& L = net.layers;
  for (int t : L[0]) net.edges.push_back({net.source, t, 1, 0});
  const Matrix* priced[3] = {&ta_ca, &ca_tb, &tb_cb};
  for (int layer = 0; layer < 3; ++layer)
    for (size_t u = 0; u < L[layer].size(); ++u)
      for (size_t v = 0; v < L[layer + 1].size(); ++v)
        net.edges.push_back(
            {L[layer][u], L[layer + 1][v], 1, scale_cost((*priced[layer])[u][v], cost_scale)});
  for (int c : L[3]) net.edges.push_back({c, net.sink, 1, 0});
  return net;
}

FlowNetwork build_network(const Dataset& data, const DistanceSpec& spec,
                          std::optional<int> num_strata, std::int64_t cost_scale) {
  auto arms = partition_arms(data.units);
  for (int a = 0; a < 4; ++a)
    if (arms[a].empty()) fail(ErrorCode::EmptyArm, std::string("arm ") + kArmNames[a] + " is empty");

  // One metric fitted on every unit in the four arms.
  std::vector<ObservedUnit> pool;
  for (const auto& a : arms) pool.insert(pool.end(), a.begin(), a.end());
  auto W = metric_embedding(data.schema, pool, spec);
  std::array<size_t, 5> offset{};
  for (int a = 0; a < 4; ++a) offset[a + 1] = offset[a] + arms[a].size();

  auto block = [&](int x, int y) {
    Matrix m(arms[x].size(), std::vector<double>(arms[y].size()));
    for (size_t i = 0; i < arms[x].size(); ++i)
      for (size_t j = 0; j < arms[y].size(); ++j)
        m[i][j] = embedded_distance(W[offset[x] + i], W[offset[y] + j]);
    return m;
  };
  auto net = build_network_from_costs(arms, block(0, 1), block(1, 2), block(2, 3), num_strata,
                                      cost_scale);
  net.spec = spec;
  return net;
}

FlowSolution min_cost_flow(const FlowNetwork& net) {
  const int n = net.num_nodes();
  // C_a and T_b vertices are split into (in, out) joined by a unit-capacity arc.
  std::vector<int> out_of(n);
  for (int v = 0; v < n; ++v) out_of[v] = v;
  int extra = n;
  for (int layer : {1, 2})
    for (int v : net.layers[layer]) out_of[v] = extra++;

  Residual g(extra);
  for (int layer : {1, 2})
    for (int v : net.layers[layer]) g.add(v, out_of[v], 1, 0);
  std::vector<int> edge_id(net.edges.size());
  for (size_t e = 0; e < net.edges.size(); ++e) {
    const auto& fe = net.edges[e];
    edge_id[e] = g.add(out_of[fe.from], fe.to, fe.capacity, fe.cost);
  }

  const std::int64_t inf = std::numeric_limits<std::int64_t>::max() / 4;
  std::vector<std::int64_t> pot(extra, 0), dist(extra);
  std::vector<int> prev(extra);
  using Item = std::pair<std::int64_t, int>;

  for (int unit = 0; unit < net.supply; ++unit) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), -1);
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[net.source] = 0;
    pq.push({0, net.source});
    while (!pq.empty()) {
      auto [du, u] = pq.top();
      pq.pop();
      if (du != dist[u]) continue;
      for (int id : g.adj[u]) {
        if (g.cap[id] <= 0) continue;
        int v = g.to[id];
        std::int64_t nd = du + g.cost[id] + pot[u] - pot[v];
        if (nd < dist[v]) {
          dist[v] = nd;
          prev[v] = id;
          pq.push({nd, v});
        }
      }
    }
    if (dist[net.sink] >= inf)
      fail(ErrorCode::Infeasible, "no augmenting path after " + std::to_string(unit) + " units");
    for (int v = 0; v < extra; ++v)
      if (dist[v] < inf) pot[v] += dist[v];
    for (int v = net.sink; v != net.source; v = g.to[prev[v] ^ 1]) {
      g.cap[prev[v]] -= 1;
      g.cap[prev[v] ^ 1] += 1;
    }
  }

  FlowSolution sol;
  sol.value = net.supply;
  sol.edge_flow.resize(net.edges.size());
  for (size_t e = 0; e < net.edges.size(); ++e) {
    sol.edge_flow[e] = net.edges[e].capacity - g.cap[edge_id[e]];
    sol.total_cost += sol.edge_flow[e] * net.edges[e].cost;
  }
  return sol;
}

PopNivDesign extract_design(const FlowNetwork& net, const FlowSolution& sol) {
  const int n = net.num_nodes();
  std::vector<int> next(n, -1);
  for (size_t e = 0; e < net.edges.size(); ++e) {
    if (sol.edge_flow[e] == 0) continue;
    const auto& fe = net.edges[e];
    if (fe.from == net.source) continue;
    if (next[fe.from] != -1)
      fail(ErrorCode::Internal, "vertex " + std::to_string(fe.from) + " carries two flow units");
    next[fe.from] = fe.to;
  }
  // Position of each node inside its layer.
  std::vector<int> slot(n, -1);
  for (int a = 0; a < 4; ++a)
    for (size_t i = 0; i < net.layers[a].size(); ++i) slot[net.layers[a][i]] = static_cast<int>(i);

  PopNivDesign design;
  for (size_t t = 0; t < net.layers[0].size(); ++t) {
    int v0 = net.layers[0][t];
    if (next[v0] == -1) continue;
    int v1 = next[v0], v2 = next[v1], v3 = v2 >= 0 ? next[v2] : -1;
    if (v1 < 0 || v2 < 0 || v3 < 0) fail(ErrorCode::Internal, "broken flow chain");
    MatchedStratum s;
    s.stratum_id = design.size();
    s.units[0][0] = net.arms[0][slot[v0]];
    s.units[0][1] = net.arms[1][slot[v1]];
    s.units[1][0] = net.arms[2][slot[v2]];
    s.units[1][1] = net.arms[3][slot[v3]];
    design.strata.push_back(std::move(s));
  }
  if (design.size() != net.supply) fail(ErrorCode::Internal, "extracted strata != flow value");
  design.provenance.distance = to_string(net.spec.kind);
  design.provenance.regularization = net.spec.regularization;
  design.provenance.cost_scale = net.cost_scale;
  design.provenance.total_cost = sol.total_cost;
  validate_design(design);
  return design;
}

PopNivDesign solve_min_cost_flow(const FlowNetwork& net) {
  return extract_design(net, min_cost_flow(net));
}

}  // namespace niv
