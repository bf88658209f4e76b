#pragma once

#include "gridcrf/types.hpp"

#include <vector>

namespace gridcrf {

// Result of projecting one row onto the probability simplex.
// `clamped` counts the entries below the threshold (the k of the sorted
// threshold search); `support` flags entries with value - threshold >= 0.
struct ProjectionResult {
  std::vector<double> q;
  double threshold = 0.0;
  std::vector<bool> support;
  int clamped = 0;
  // Some entry sits within 1e-12 of the clamp threshold; derivative
  // callers should treat the result as a subgradient choice.
  bool at_kink = false;
};

// Exact Euclidean projection onto the simplex via the sorted threshold
// search. Throws std::invalid_argument on non-finite input.
ProjectionResult project_row(const std::vector<double>& row);

// Leaky variant: the threshold is found exactly as in project_row, then
// entries below it are scaled by alpha instead of clamped to zero.
// alpha = 0 reduces to project_row; alpha = 1 is a pure shift.
ProjectionResult project_row_leaky(const std::vector<double>& row, double alpha);

// Jacobian of the leaky projection at `row`, labels x labels,
// entry (lam, mu) = d out_lam / d in_mu. Entries exactly at the clamp
// threshold take the pass-through branch.
Matrix projection_jacobian(const std::vector<double>& row, double alpha,
                           bool* at_kink = nullptr);

// Applies project_row_leaky independently to every pixel row. Errors are
// rethrown with the offending pixel index attached.
RelaxedState project_field(const Matrix& field, double alpha);

}  // namespace gridcrf
