#pragma once

#include "gridcrf/kernels.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace gridcrf {

// Hash map from quantised 5-D feature cells to the pixels they contain.
// Supports the neighbour queries behind the bilateral term: all pixels
// whose cell differs from a given cell by at most `radius` per component.
class FeatureLattice {
 public:
  FeatureLattice() = default;
  FeatureLattice(const FeatureField& features, int radius);

  int radius() const { return radius_; }
  const std::array<int, 5>& cell_of(int pixel) const { return cells_[pixel]; }
  const std::vector<int>* pixels_in(const std::array<int, 5>& cell) const;

  // All pixels j != pixel with ||cell(j) - cell(pixel)||_inf <= radius,
  // in ascending pixel order.
  std::vector<int> neighbours(int pixel) const;

 private:
  struct CellHash {
    size_t operator()(const std::array<int, 5>& c) const;
  };

  int radius_ = 0;
  std::vector<std::array<int, 5>> cells_;
  std::unordered_map<std::array<int, 5>, std::vector<int>, CellHash> buckets_;
};

// Builds the lattice index for a feature field (cells are the
// component-wise floor of the scaled features).
FeatureLattice build_feature_lattice(const FeatureField& features, int radius);

}  // namespace gridcrf
