#include "gridcrf/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gridcrf {

std::pair<DiscreteLabeling, double> exhaustive_min(const CrfInstance& inst,
                                                   const OracleBudget& budget) {
  const int n = inst.geometry.pixels();
  const int labels = inst.labels;

  double configurations = std::pow(static_cast<double>(labels), n);
  if (configurations > static_cast<double>(budget.max_configurations))
    throw std::invalid_argument(
        "exhaustive_min: " + std::to_string(labels) + "^" + std::to_string(n) +
        " labelings exceed the budget of " +
        std::to_string(budget.max_configurations));

  DiscreteLabeling x(n, 0);
  DiscreteLabeling best = x;
  double best_energy = energy_discrete(inst, x);
  // Lexicographic enumeration with strict improvement keeps the first,
  // hence lexicographically smallest, minimizer.
  while (true) {
    int pos = n - 1;
    while (pos >= 0 && x[pos] == labels - 1) x[pos--] = 0;
    if (pos < 0) break;
    ++x[pos];
    const double energy = energy_discrete(inst, x);
    if (energy < best_energy) {
      best_energy = energy;
      best = x;
    }
  }
  return {best, best_energy};
}

std::vector<double> project_oracle(const std::vector<double>& row) {
  const int n = static_cast<int>(row.size());
  if (n < 1) throw std::invalid_argument("project_oracle: empty row");
  if (n > 30) throw std::invalid_argument("project_oracle: row too long to enumerate");

  std::vector<double> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) {
        sum += row[i];
        ++count;
      }
    const double t = (sum - 1.0) / count;
    std::vector<double> candidate(n, 0.0);
    bool feasible = true;
    double dist = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        candidate[i] = row[i] - t;
        if (candidate[i] < 0.0) feasible = false;
      }
      const double diff = candidate[i] - row[i];
      dist += diff * diff;
    }
    if (feasible && dist < best_dist) {
      best_dist = dist;
      best = candidate;
    }
  }
  return best;
}

Matrix dense_bilateral(const Matrix& q, const FeatureField& features,
                       const BilateralKernelBank& bank,
                       const OracleBudget& budget) {
  const int n = static_cast<int>(q.rows());
  const int labels = static_cast<int>(q.cols());
  if (features.pixels() != n)
    throw std::invalid_argument("dense_bilateral: feature/state shape mismatch");
  if (n > budget.max_pixels_dense)
    throw std::invalid_argument("dense_bilateral: " + std::to_string(n) +
                                " pixels exceed the dense budget of " +
                                std::to_string(budget.max_pixels_dense));

  std::vector<std::array<int, 5>> cells(n);
  for (int i = 0; i < n; ++i) cells[i] = feature_cell(features, i);

  Matrix out = Matrix::Zero(n, labels);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      std::array<int, 5> d;
      bool inside = true;
      for (int k = 0; k < 5; ++k) {
        d[k] = cells[i][k] - cells[j][k];
        if (d[k] < -bank.radius || d[k] > bank.radius) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      for (int lam = 0; lam < labels; ++lam) {
        double acc = 0.0;
        for (int mu = 0; mu < labels; ++mu)
          acc += bank.tap(lam, mu, d) * q(j, mu);
        out(i, lam) += acc;
      }
    }
  }
  return out;
}

}  // namespace gridcrf
