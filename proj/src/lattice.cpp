#include "gridcrf/lattice.hpp"

#include <algorithm>

namespace gridcrf {

size_t FeatureLattice::CellHash::operator()(const std::array<int, 5>& c) const {
  // FNV-style mix over the five coordinates.
  std::uint64_t h = 1469598103934665603ull;
  for (int v : c) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

FeatureLattice::FeatureLattice(const FeatureField& features, int radius)
    : radius_(radius) {
  const int n = features.pixels();
  cells_.resize(n);
  for (int i = 0; i < n; ++i) {
    cells_[i] = feature_cell(features, i);
    buckets_[cells_[i]].push_back(i);  // pixel lists stay in ascending order
  }
}

const std::vector<int>* FeatureLattice::pixels_in(
    const std::array<int, 5>& cell) const {
  auto it = buckets_.find(cell);
  return it == buckets_.end() ? nullptr : &it->second;
}

std::vector<int> FeatureLattice::neighbours(int pixel) const {
  std::vector<int> out;
  const auto& base = cells_[pixel];
  std::array<int, 5> probe;
  // Walk the (2r+1)^5 offset cube around the pixel's cell.
  std::array<int, 5> d{-radius_, -radius_, -radius_, -radius_, -radius_};
  while (true) {
    for (int k = 0; k < 5; ++k) probe[k] = base[k] + d[k];
    if (const std::vector<int>* bucket = pixels_in(probe)) {
      for (int j : *bucket)
        if (j != pixel) out.push_back(j);
    }
    int k = 4;
    while (k >= 0 && d[k] == radius_) d[k--] = -radius_;
    if (k < 0) break;
    ++d[k];
  }
  std::sort(out.begin(), out.end());
  return out;
}

FeatureLattice build_feature_lattice(const FeatureField& features, int radius) {
  return FeatureLattice(features, radius);
}

}  // namespace gridcrf
