#pragma once

#include <string>

#include "nested_iv/data_model.hpp"

namespace plco {

inline constexpr int kStrata = 3071;
inline constexpr int kUptakeA = 1602;
inline constexpr int kUptakeB = 2422;
// Confirmed cancers in C_a, T_a, C_b, T_b.
inline constexpr int kCancers[4] = {61, 51, 45, 47};

// Units and a design whose arm-level marginals match the published counts.
struct Reconstruction {
  niv::Dataset units;
  niv::PopNivDesign design;
};

Reconstruction reconstruct();

// Writes units.csv and design.csv under dir.
void write_files(const Reconstruction& r, const std::string& dir);

}  // namespace plco
