#pragma once

#include "gridcrf/instance.hpp"
#include "gridcrf/lattice.hpp"
#include "gridcrf/simplex.hpp"
#include "gridcrf/types.hpp"

#include <string>
#include <vector>

namespace gridcrf {

struct InferenceConfig {
  int iterations = 5;
  double step_size = 0.5;
  double leak = 0.0;
  // When on, the step size is clamped to step_size_bound(inst), which
  // makes the energy sequence non-increasing for leak = 0.
  bool safe_step = false;
};

// The iterates of one inference run: states q^0..q^T with their relaxed
// energies, the pre-projection states (gradient-descent runs only, needed
// by the backward pass), and the KL objective when it is defined.
struct InferenceTrace {
  std::vector<Matrix> states;
  std::vector<Matrix> pre_projection;
  std::vector<double> energies;
  std::vector<double> kl;
  std::string method;
  SimplexMode mode = SimplexMode::kStrict;
  std::vector<std::string> warnings;

  int steps() const { return static_cast<int>(states.size()) - 1; }
  const Matrix& final_state() const { return states.back(); }
};

// Filter response of the spatial bank: out(i, lam) = sum over window
// displacements d and labels mu of tap(lam, mu, d) * q(i + d, mu), with
// zero padding at the grid border.
Matrix spatial_response(const Matrix& q, const GridGeometry& geometry,
                        const SpatialKernelBank& bank);

// Filter response of the bilateral bank: out(i, lam) sums
// tap(lam, mu, cell_i - cell_j) * q(j, mu) over all pixels j != i within
// lattice offset `bank.radius`. Contributions accumulate in ascending j
// order so the result is bit-identical to the dense reference sum.
Matrix bilateral_response(const Matrix& q, const FeatureField& features,
                          const BilateralKernelBank& bank,
                          const FeatureLattice& lattice);

// Exact gradient of energy_relaxed at q for symmetrized kernels:
// psi + 2 * (spatial response + bilateral response). The factor 2
// accounts for both directions of each ordered pixel pair.
Matrix energy_gradient(const CrfInstance& inst, const Matrix& q,
                       const FeatureLattice* lattice = nullptr);

// One projected gradient step: descend by step_size, then project every
// pixel row back to the simplex (leaky for leak > 0).
RelaxedState pgd_step(const RelaxedState& q, const CrfInstance& inst,
                      const InferenceConfig& config,
                      const FeatureLattice* lattice = nullptr,
                      Matrix* pre_projection = nullptr);

// Runs `iterations` projected gradient steps from q0, recording every
// state and its relaxed energy. Throws std::runtime_error if an energy
// turns non-finite.
InferenceTrace run_pgd(const CrfInstance& inst, const RelaxedState& q0,
                       const InferenceConfig& config);

// Initial state from the upstream class scores. Rows deviating from sum
// one by more than 1e-6 are renormalized; `renormalized`, when given,
// reports whether that happened.
RelaxedState init_q0(const Matrix& scores, bool* renormalized = nullptr);

// One parallel mean-field sweep: every row becomes the softmax of minus
// the energy gradient evaluated at the previous state.
RelaxedState mean_field_step(const RelaxedState& q, const CrfInstance& inst,
                             const FeatureLattice* lattice = nullptr);

// Runs `iterations` parallel mean-field sweeps, recording relaxed energy
// and KL objective per step. The energy may increase along the trace;
// the KL objective is what this update descends.
InferenceTrace run_mean_field(const CrfInstance& inst, const RelaxedState& q0,
                              int iterations);

// energy_relaxed(q) minus the entropy of q (0 log 0 = 0).
double kl_objective(const CrfInstance& inst, const RelaxedState& q);

// Sequentially rounds q to a discrete labeling in raster order, fixing
// each pixel to the label minimizing the partially-rounded energy. The
// result never has higher energy than energy_relaxed(q). Requires a
// strict (row-stochastic) state; ties go to the smallest label.
DiscreteLabeling round_sequential(const CrfInstance& inst, const RelaxedState& q);

}  // namespace gridcrf
