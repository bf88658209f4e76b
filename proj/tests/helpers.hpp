#pragma once

#include "gridcrf/instance.hpp"
#include "gridcrf/rng.hpp"

#include <cstdint>

namespace gridcrf::testing {

// The 1x2 two-label instance with psi_1 = (0, 1), psi_2 = (1, 0) and a
// Potts spatial tap of 0.5 at displacement (+-1, 0). Its four labelings
// have energies E(0,0) = 1, E(0,1) = 1, E(1,0) = 3, E(1,1) = 1.
inline CrfInstance potts_1x2() {
  CrfInstance inst;
  inst.geometry = {1, 2, 1};
  inst.labels = 2;
  Matrix scores(2, 2);
  scores << 1.0, std::exp(-1.0), std::exp(-1.0), 1.0;
  inst.unary = make_unary(scores, 1.0, 0.0);
  inst.spatial = SpatialKernelBank::zeros(2, 1);
  for (int d : {-1, 1}) {
    inst.spatial.tap(0, 1, d, 0) = 0.5;
    inst.spatial.tap(1, 0, d, 0) = 0.5;
  }
  inst.validate();
  return inst;
}

// Random symmetrized instance: Dirichlet unary scores, uniform taps in
// [-scale, scale], optionally a bilateral bank over random features that
// land in a handful of lattice cells.
inline CrfInstance random_instance(std::uint64_t seed, int height, int width,
                                   int labels, int spatial_radius,
                                   bool with_bilateral, int bilateral_radius = 1,
                                   double scale = 0.4) {
  Rng rng(seed);
  const int n = height * width;
  CrfInstance inst;
  inst.geometry = {height, width, spatial_radius};
  inst.labels = labels;

  Matrix scores(n, labels);
  for (int i = 0; i < n; ++i) {
    const auto row = rng.dirichlet_row(labels);
    for (int l = 0; l < labels; ++l) scores(i, l) = row[l];
  }
  inst.unary = make_unary(scores, 0.5, 1e-8);

  inst.spatial = SpatialKernelBank::zeros(labels, spatial_radius);
  for (double& tap : inst.spatial.taps) tap = rng.uniform(-scale, scale);
  inst.spatial.symmetrize();
  inst.spatial.pin_self_taps();

  if (with_bilateral) {
    inst.bilateral = BilateralKernelBank::zeros(labels, bilateral_radius);
    for (double& tap : inst.bilateral->taps) tap = rng.uniform(-scale, scale);
    inst.bilateral->symmetrize();
    FeatureField features;
    features.theta_p = 2.0;
    features.theta_c = 64.0;
    features.values.resize(n, 5);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 5; ++d) features.values(i, d) = rng.uniform(0.0, 2.5);
    inst.features = std::move(features);
  }

  inst.validate();
  return inst;
}

inline RelaxedState random_state(Rng& rng, int pixels, int labels) {
  RelaxedState state;
  state.q.resize(pixels, labels);
  for (int i = 0; i < pixels; ++i) {
    const auto row = rng.dirichlet_row(labels);
    for (int l = 0; l < labels; ++l) state.q(i, l) = row[l];
  }
  return state;
}

inline RelaxedState integral_state(const DiscreteLabeling& x, int labels) {
  RelaxedState state;
  state.q = Matrix::Zero(static_cast<int>(x.size()), labels);
  for (size_t i = 0; i < x.size(); ++i) state.q(static_cast<int>(i), x[i]) = 1.0;
  return state;
}

}  // namespace gridcrf::testing
