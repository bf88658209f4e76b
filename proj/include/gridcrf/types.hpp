#pragma once

#include <Eigen/Core>

#include <vector>

namespace gridcrf {

// Pixel fields are stored one row per pixel, one column per label.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raster-ordered pixel grid. Pixel i sits at (x, y) = (i % width, i / width).
// Two pixels interact through the spatial term when both coordinate
// differences are at most spatial_radius; pixels near the border simply
// have fewer neighbours (taps falling outside the grid contribute zero).
struct GridGeometry {
  int height = 0;
  int width = 0;
  int spatial_radius = 0;

  int pixels() const { return height * width; }
  int index(int x, int y) const { return y * width + x; }
  int pixel_x(int i) const { return i % width; }
  int pixel_y(int i) const { return i / width; }
  bool contains(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
};

// One label per pixel, raster order.
using DiscreteLabeling = std::vector<int>;

enum class SimplexMode { kStrict, kLeaky };

// One length-L row per pixel. Strict rows lie exactly on the probability
// simplex. Leaky rows come out of the leaky projection: entries may be
// slightly negative and row sums may fall below one.
struct RelaxedState {
  Matrix q;
  SimplexMode mode = SimplexMode::kStrict;

  int pixels() const { return static_cast<int>(q.rows()); }
  int labels() const { return static_cast<int>(q.cols()); }
};

}  // namespace gridcrf
