#include "gridcrf/rng.hpp"

#include <cmath>

namespace gridcrf {

std::vector<double> Rng::dirichlet_row(int n) {
  std::vector<double> row(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    row[i] = -std::log(1.0 - uniform());
    total += row[i];
  }
  for (int i = 0; i < n; ++i) row[i] /= total;
  return row;
}

}  // namespace gridcrf
