#pragma once

#include "gridcrf/instance.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gridcrf {

// Caps for the brute-force references.
struct OracleBudget {
  std::uint64_t max_configurations = 1ull << 20;
  int max_pixels_dense = 256;
};

// Enumerates all L^N labelings and returns the energy minimizer (ties go
// to the lexicographically smallest labeling). Throws std::invalid_argument
// with the required budget when L^N exceeds it.
std::pair<DiscreteLabeling, double> exhaustive_min(const CrfInstance& inst,
                                                   const OracleBudget& budget = {});

// Active-set reference for the simplex projection: tries every nonempty
// support subset, solves the equality-constrained least squares on it,
// and keeps the feasible candidate closest to the input.
std::vector<double> project_oracle(const std::vector<double>& row);

// O(N^2) reference for the bilateral response: a double loop over all
// ordered pixel pairs with the same cell-offset tap lookup semantics.
Matrix dense_bilateral(const Matrix& q, const FeatureField& features,
                       const BilateralKernelBank& bank,
                       const OracleBudget& budget = {});

}  // namespace gridcrf
