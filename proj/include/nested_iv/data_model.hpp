#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace niv {

enum class Group { A, B };
enum class Arm { Control, Treated };

struct IvLevel {
  Group group = Group::A;
  Arm arm = Arm::Control;

  bool operator==(const IvLevel&) const = default;
  bool treated() const { return arm == Arm::Treated; }
};

inline constexpr IvLevel kControlA{Group::A, Arm::Control};
inline constexpr IvLevel kTreatedA{Group::A, Arm::Treated};
inline constexpr IvLevel kControlB{Group::B, Arm::Control};
inline constexpr IvLevel kTreatedB{Group::B, Arm::Treated};

// Accepts "0a", "1a", "0b", "1b" in any letter case; anything else is rejected.
std::optional<IvLevel> parse_iv_level(std::string_view token);
std::string to_string(IvLevel z);
// Arm index in the order T_a, C_a, T_b, C_b used by the flow network.
int arm_index(IvLevel z);
IvLevel arm_level(int index);

using CovariateValue = std::variant<double, std::string>;

enum class CovariateKind { Numeric, Categorical };
enum class CategoricalEncoding { OneHot, Integer };

struct CovariateSchema {
  std::string name;
  CovariateKind kind = CovariateKind::Numeric;
  // Sorted distinct levels for categorical covariates.
  std::vector<std::string> levels;
};

struct ObservedUnit {
  std::string unit_id;
  IvLevel z;
  int d = 0;
  double r = 0.0;
  std::vector<CovariateValue> covariates;

  bool operator==(const ObservedUnit&) const = default;
};

struct Dataset {
  std::vector<CovariateSchema> schema;
  std::vector<ObservedUnit> units;

  int covariate_index(std::string_view name) const;
  const ObservedUnit* find(std::string_view unit_id) const;
};

// Numeric design matrix for the named covariates (all when `names` is empty).
// Categorical columns expand per the encoding.
std::vector<std::vector<double>> encode_covariates(const std::vector<CovariateSchema>& schema,
                                                   const std::vector<ObservedUnit>& units,
                                                   const std::vector<std::string>& names,
                                                   CategoricalEncoding encoding);

struct MatchedStratum {
  int stratum_id = 0;
  // units[j][k]: pair j (0 or 1), slot k (0 or 1), i.e. positions i11, i12, i21, i22.
  std::array<std::array<ObservedUnit, 2>, 2> units;

  int pair_of(Group g) const;
  const ObservedUnit& treated(Group g) const;
  const ObservedUnit& control(Group g) const;
  // Z^g at the four positions, ordered (i11, i12, i21, i22).
  std::array<double, 4> auxiliary_z(Group g) const;
};

// Throws InvalidDesign when the stratum does not hold one 1_g/0_g pair per group
// or repeats a unit id.
void validate_stratum(const MatchedStratum& s);

std::array<double, 4> auxiliary_z(const MatchedStratum& s, Group g);

struct DesignProvenance {
  std::string distance = "external";
  double regularization = 0.0;
  std::int64_t cost_scale = 0;
  std::uint64_t seed = 0;
  std::int64_t total_cost = 0;
};

struct PopNivDesign {
  std::vector<MatchedStratum> strata;
  DesignProvenance provenance;

  int size() const { return static_cast<int>(strata.size()); }
};

void validate_design(const PopNivDesign& design);

enum class PrincipalKind { SW, ACO, AT_NT, AAT, NT_AT, ANT };
enum class SwitcherOrigin { None, FromNT, FromAT };

const char* to_string(PrincipalKind k);

// Potential treatment received, ordered (d_{C^a}, d_{T^a}, d_{C^b}, d_{T^b}).
struct DPot {
  int c_a = 0, t_a = 0, c_b = 0, t_b = 0;
  bool operator==(const DPot&) const = default;
  int at(IvLevel z) const;
};

DPot d_pattern(PrincipalKind kind, SwitcherOrigin origin = SwitcherOrigin::None);
std::vector<DPot> all_d_patterns();

struct LatentUnit {
  PrincipalKind kind = PrincipalKind::ANT;
  SwitcherOrigin origin = SwitcherOrigin::None;
  DPot d_pot;
  double r0 = 0.0;  // r_{d=0}
  double r1 = 0.0;  // r_{d=1}

  int d_at(IvLevel z) const { return d_pot.at(z); }
  // Exclusion restriction: the outcome depends on z only through d.
  double r_at(IvLevel z) const { return d_at(z) ? r1 : r0; }
};

LatentUnit make_latent(PrincipalKind kind, SwitcherOrigin origin, double r0, double r1);

}  // namespace niv
