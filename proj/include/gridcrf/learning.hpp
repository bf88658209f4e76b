#pragma once

#include "gridcrf/inference.hpp"
#include "gridcrf/instance.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gridcrf {

// The learnable weights: the unary weight and both tap banks.
struct ParameterSet {
  double unary_weight = 0.5;
  SpatialKernelBank spatial;
  std::optional<BilateralKernelBank> bilateral;
};

// Loss partials mirroring ParameterSet, plus the partial with respect to
// the unary source scores (the upstream input).
struct GradientSet {
  double unary_weight = 0.0;
  SpatialKernelBank spatial;
  std::optional<BilateralKernelBank> bilateral;
  Matrix scores;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-3;
  int batch_size = 1;
  int epochs = 1;
  double leak = 0.01;
  InferenceConfig inference;
};

// Default initialization: unary weight 0.5, spatial taps all zero (no
// shape imposed up front), bilateral taps Gaussian in the lattice offset
// with Potts class interaction (same-class filters zero). Pass
// bilateral_radius < 0 to skip the bilateral bank.
ParameterSet init_params(int labels, int spatial_radius, int bilateral_radius,
                         double bilateral_strength = 0.1);

// Copies a parameter set onto an instance, rebuilding the unary field
// from the stored scores under the new weight.
CrfInstance apply_parameters(const CrfInstance& inst, const ParameterSet& params);
ParameterSet extract_parameters(const CrfInstance& inst);

// Backpropagates grad_out (= dLoss/dq^{t+1}) through forward step `step`
// of the trace: first the projection Jacobian at the stored
// pre-projection state, then the affine descent step (its transpose is
// the filter correlation with displacements flipped and label indices
// swapped). Returns dLoss/dq^t; parameter partials are added into
// `accum`, whose `scores` slot collects dLoss/dpsi (backward_unroll
// converts it to dLoss/dz at the end).
Matrix backward_step(const Matrix& grad_out, const InferenceTrace& trace,
                     int step, const CrfInstance& inst,
                     const InferenceConfig& config, GradientSet& accum,
                     const FeatureLattice* lattice = nullptr);

// Full reverse sweep through an unrolled projected-gradient trace.
// Returns loss partials for every parameter group and for the unary
// source scores (initialization path plus unary-potential path).
// Assumes the trace started at q^0 = scores.
GradientSet backward_unroll(const InferenceTrace& trace,
                            const Matrix& grad_loss_at_final,
                            const CrfInstance& inst,
                            const InferenceConfig& config);

// Mean per-pixel negative log-likelihood of the true labels under q,
// clamped at 1e-12, and its gradient with respect to q.
double loss_nll(const RelaxedState& q, const DiscreteLabeling& truth,
                Matrix* grad = nullptr);

// Velocity state for momentum updates, shapes mirroring ParameterSet.
struct Velocity {
  double unary_weight = 0.0;
  SpatialKernelBank spatial;
  std::optional<BilateralKernelBank> bilateral;

  static Velocity zeros_like(const ParameterSet& params);
};

// Classical momentum with weight decay:
//   v <- momentum * v - lr * (g + wd * p);  p <- p + v.
// Afterwards the spatial self-taps are re-pinned to zero and both banks
// re-symmetrized, so the structural invariants survive training.
void sgd_update(ParameterSet& params, const GradientSet& grads,
                Velocity& velocity, const TrainConfig& config);

// Finite-difference audit of backward_unroll: every analytic partial is
// compared against central differences (h = 1e-5) of the NLL loss
// through the unrolled forward pass. Errors are reported per parameter
// group as max absolute deviation over the group's dominant magnitude.
// kink_free is false when some projection input sat within kink_margin
// of a clamp threshold; callers should then resample.
struct GradCheckReport {
  double unary_weight_error = 0.0;
  double spatial_error = 0.0;
  double bilateral_error = 0.0;
  double scores_error = 0.0;
  bool kink_free = true;

  double max_error() const;
  std::string summary() const;
};

GradCheckReport grad_check(const CrfInstance& inst, const DiscreteLabeling& truth,
                           int iterations, double leak, double step_size = 0.5,
                           double kink_margin = 1e-7);

// A labelled instance for the toy trainer.
struct TrainSample {
  CrfInstance instance;
  DiscreteLabeling truth;
};

struct TrainResult {
  ParameterSet params;
  std::vector<double> losses;  // mean batch loss per update step
};

// Plain end-to-end training loop over the unrolled inference: forward,
// NLL loss, reverse sweep, momentum update. Batches average gradients.
TrainResult train(const std::vector<TrainSample>& data, const ParameterSet& start,
                  const TrainConfig& config);

}  // namespace gridcrf
