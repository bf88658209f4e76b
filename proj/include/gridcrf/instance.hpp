#pragma once

#include "gridcrf/kernels.hpp"
#include "gridcrf/types.hpp"

#include <optional>

namespace gridcrf {

// Unary potentials psi_i(lam) = -weight * log(scores(i,lam) + floor).
// The raw scores are retained for the backward pass.
struct UnaryField {
  Matrix psi;
  Matrix scores;
  double weight = 0.5;
  double floor = 1e-8;

  int pixels() const { return static_cast<int>(psi.rows()); }
  int labels() const { return static_cast<int>(psi.cols()); }
};

// Builds a UnaryField from class scores in [0,1]. Throws
// std::invalid_argument when scores leave [0,1] or some score + floor
// is not positive.
UnaryField make_unary(const Matrix& scores, double weight, double floor);

// A full energy specification: grid, label count, unary field, spatial
// kernel bank, and optionally a bilateral bank over quantised pixel
// features. Instances are immutable value objects after construction;
// every operation on them is a pure function.
struct CrfInstance {
  GridGeometry geometry;
  int labels = 0;
  UnaryField unary;
  SpatialKernelBank spatial;
  std::optional<BilateralKernelBank> bilateral;
  std::optional<FeatureField> features;

  bool has_bilateral() const { return bilateral.has_value(); }
  // Throws std::invalid_argument when shapes or invariants are broken.
  void validate() const;
};

// Exact Gibbs energy of a discrete labeling: the unary sum plus the
// pairwise sum over ordered pixel pairs (both directions counted).
double energy_discrete(const CrfInstance& inst, const DiscreteLabeling& x);

// The relaxed (multilinear) energy of a simplex-valued state. Agrees
// with energy_discrete whenever q is integral.
double energy_relaxed(const CrfInstance& inst, const RelaxedState& q);

// Replaces every tap by the mean of itself and its ordered-pair mirror,
// in both banks. The relaxed energy of every state is unchanged.
CrfInstance symmetrize_kernels(const CrfInstance& inst);

// A Gershgorin-style bound on the safe gradient step: 1 / (2 * max over
// pixels of the total absolute pairwise mass incident to that pixel).
// Any step size at or below the bound makes projected descent
// non-increasing. All-zero pairwise terms return `cap`.
double step_size_bound(const CrfInstance& inst, double cap = 1e6);

}  // namespace gridcrf
