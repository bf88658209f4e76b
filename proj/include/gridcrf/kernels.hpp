#pragma once

#include "gridcrf/types.hpp"

#include <array>
#include <vector>

namespace gridcrf {

// L x L learnable filters over pixel displacements, each of size
// (2*radius+1)^2. tap(lam, mu, dx, dy) is the energy added when a pixel
// takes label lam and the pixel displaced by (dx, dy) takes label mu.
// The tap at displacement (0,0) is pinned to zero for every label pair:
// a pixel never interacts with itself through the spatial term.
struct SpatialKernelBank {
  int labels = 0;
  int radius = 0;
  std::vector<double> taps;

  static SpatialKernelBank zeros(int labels, int radius);

  int side() const { return 2 * radius + 1; }
  int window() const { return side() * side(); }
  int size() const { return labels * labels * window(); }

  int tap_index(int lam, int mu, int dx, int dy) const {
    return ((lam * labels + mu) * side() + (dy + radius)) * side() + (dx + radius);
  }
  double tap(int lam, int mu, int dx, int dy) const {
    return taps[tap_index(lam, mu, dx, dy)];
  }
  double& tap(int lam, int mu, int dx, int dy) {
    return taps[tap_index(lam, mu, dx, dy)];
  }

  // Zero the (0,0) tap of every label pair.
  void pin_self_taps();
  // k[lam,mu](d) <- (k[lam,mu](d) + k[mu,lam](-d)) / 2. Leaves the energy
  // of every labeling unchanged and makes the filter response the exact
  // half-gradient of the pairwise energy.
  void symmetrize();
  bool is_symmetric(double tol) const;
  // The adjoint filter bank: displacements flipped, label indices swapped.
  SpatialKernelBank transposed() const;
};

// L x L filters over integer offsets in the quantised 5-D feature lattice,
// window (2*radius+1)^5. The zero offset is kept even on the diagonal:
// distinct pixels may share a feature cell.
struct BilateralKernelBank {
  int labels = 0;
  int radius = 0;
  std::vector<double> taps;

  static BilateralKernelBank zeros(int labels, int radius);

  int side() const { return 2 * radius + 1; }
  int window() const;
  int size() const { return labels * labels * window(); }

  int offset_index(const std::array<int, 5>& d) const;
  int tap_index(int lam, int mu, const std::array<int, 5>& d) const {
    return (lam * labels + mu) * window() + offset_index(d);
  }
  double tap(int lam, int mu, const std::array<int, 5>& d) const {
    return taps[tap_index(lam, mu, d)];
  }
  double& tap(int lam, int mu, const std::array<int, 5>& d) {
    return taps[tap_index(lam, mu, d)];
  }

  void symmetrize();
  bool is_symmetric(double tol) const;
  BilateralKernelBank transposed() const;

  // Enumerates the offsets in canonical (lexicographic) order, matching
  // the flat tap layout.
  static std::vector<std::array<int, 5>> offsets(int radius);
};

// Per-pixel feature vector (x/theta_p, y/theta_p, r/theta_c, g/theta_c,
// b/theta_c), stored already scaled.
struct FeatureField {
  Matrix values;  // pixels x 5
  double theta_p = 1.0;
  double theta_c = 1.0;

  int pixels() const { return static_cast<int>(values.rows()); }
};

// Builds the feature field straight from raster RGB bytes.
FeatureField make_features(const GridGeometry& geometry,
                           const std::vector<unsigned char>& rgb,
                           double theta_p, double theta_c);

// The integer feature-lattice cell of one pixel (component-wise floor).
std::array<int, 5> feature_cell(const FeatureField& features, int pixel);

}  // namespace gridcrf
