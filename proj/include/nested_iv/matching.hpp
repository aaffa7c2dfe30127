#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nested_iv/data_model.hpp"

namespace niv {

enum class DistanceKind { RankMahalanobis, Euclidean, Precomputed };

const char* to_string(DistanceKind k);

struct DistanceSpec {
  DistanceKind kind = DistanceKind::RankMahalanobis;
  std::vector<std::string> covariate_subset;  // empty means all covariates
  double regularization = 1e-4;
  CategoricalEncoding encoding = CategoricalEncoding::OneHot;
};

using Matrix = std::vector<std::vector<double>>;

// Rank-Mahalanobis ranks and covariance come from the pooled x and y units.
Matrix distance_matrix(const std::vector<CovariateSchema>& schema,
                       const std::vector<ObservedUnit>& units_x,
                       const std::vector<ObservedUnit>& units_y, const DistanceSpec& spec);

// Coordinates in which plain Euclidean distance equals the spec's distance.
// Rank-Mahalanobis ranks and covariance are computed over `units`.
Matrix metric_embedding(const std::vector<CovariateSchema>& schema,
                        const std::vector<ObservedUnit>& units, const DistanceSpec& spec);
double embedded_distance(const std::vector<double>& a, const std::vector<double>& b);

// Node ids: 0 is the source, then the T_a, C_a, T_b, C_b layers in order, then the sink.
struct FlowEdge {
  int from = 0;
  int to = 0;
  int capacity = 1;
  std::int64_t cost = 0;
};

struct FlowNetwork {
  int source = 0;
  int sink = 0;
  std::array<std::vector<int>, 4> layers;           // T_a, C_a, T_b, C_b
  std::array<std::vector<ObservedUnit>, 4> arms;     // units behind each layer node
  std::vector<FlowEdge> edges;
  int supply = 0;                                    // I
  std::int64_t cost_scale = 10000;
  DistanceSpec spec;

  int num_nodes() const { return sink + 1; }
};

std::array<std::vector<ObservedUnit>, 4> partition_arms(const std::vector<ObservedUnit>& units);

// num_strata empty means Auto: I = min arm size.
FlowNetwork build_network(const Dataset& data, const DistanceSpec& spec,
                          std::optional<int> num_strata, std::int64_t cost_scale = 10000);

// Network over explicit arms with caller-supplied costs for the three priced layers:
// ta_ca is T_a x C_a, ca_tb is C_a x T_b, tb_cb is T_b x C_b. Costs are scaled and rounded.
FlowNetwork build_network_from_costs(std::array<std::vector<ObservedUnit>, 4> arms,
                                     const Matrix& ta_ca, const Matrix& ca_tb,
                                     const Matrix& tb_cb, std::optional<int> num_strata,
                                     std::int64_t cost_scale = 10000);

struct FlowSolution {
  std::vector<int> edge_flow;  // parallel to FlowNetwork::edges
  std::int64_t total_cost = 0;
  int value = 0;
};

// Successive shortest paths with node potentials. Intermediate C_a and T_b vertices
// carry unit throughput so that every unit joins at most one stratum.
FlowSolution min_cost_flow(const FlowNetwork& net);

PopNivDesign extract_design(const FlowNetwork& net, const FlowSolution& sol);
PopNivDesign solve_min_cost_flow(const FlowNetwork& net);

struct ArmSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> counts;  // per level, categorical rows only
  int n = 0;
};

struct BalanceRow {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;
  std::array<ArmSummary, 4> arms;  // T_a, C_a, T_b, C_b
  double statistic = 0.0;
  double p_value = 1.0;
  bool degenerate = false;

  const char* test_kind() const { return categorical ? "chi-square" : "ANOVA"; }
};

struct BalanceReport {
  std::vector<BalanceRow> rows;
};

// One row per covariate (all covariates when the list is empty) and a final
// treatment-uptake row.
BalanceReport balance_report(const PopNivDesign& design, const std::vector<CovariateSchema>& schema,
                             const std::vector<std::string>& covariates = {});

}  // namespace niv
