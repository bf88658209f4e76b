#include "gridcrf/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gridcrf {

namespace {

constexpr double kKinkTolerance = 1e-12;

// Sorted threshold search. Returns the threshold and the number of
// clamped (below-threshold) entries.
void find_threshold(const std::vector<double>& row, double* threshold,
                    int* clamped) {
  const int n = static_cast<int>(row.size());
  if (n < 1) throw std::invalid_argument("projection: empty row");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(row[i]))
      throw std::invalid_argument("projection: non-finite entry at index " +
                                  std::to_string(i));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Ties broken by index for determinism.
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return row[a] != row[b] ? row[a] < row[b] : a < b;
  });

  // Grow the candidate support from the top of the sorted row until the
  // threshold over it clears the largest excluded entry.
  double suffix = 0.0;
  for (int k = n - 1; k >= 1; --k) {
    suffix += row[order[k]];
    const double t = (suffix - 1.0) / (n - k);
    if (t >= row[order[k - 1]]) {
      *threshold = t;
      *clamped = k;
      return;
    }
  }
  suffix += row[order[0]];
  *threshold = (suffix - 1.0) / n;
  *clamped = 0;
}

ProjectionResult apply_threshold(const std::vector<double>& row, double alpha,
                                 double threshold, int clamped) {
  const int n = static_cast<int>(row.size());
  ProjectionResult result;
  result.threshold = threshold;
  result.clamped = clamped;
  result.q.resize(n);
  result.support.resize(n);
  for (int i = 0; i < n; ++i) {
    const double residual = row[i] - threshold;
    // Entries exactly at the threshold take the pass-through branch.
    result.support[i] = residual >= 0.0;
    result.q[i] = result.support[i] ? residual : alpha * residual;
    if (std::abs(residual) <= kKinkTolerance) result.at_kink = true;
  }
  return result;
}

}  // namespace

ProjectionResult project_row(const std::vector<double>& row) {
  return project_row_leaky(row, 0.0);
}

ProjectionResult project_row_leaky(const std::vector<double>& row, double alpha) {
  double threshold = 0.0;
  int clamped = 0;
  find_threshold(row, &threshold, &clamped);
  return apply_threshold(row, alpha, threshold, clamped);
}

Matrix projection_jacobian(const std::vector<double>& row, double alpha,
                           bool* at_kink) {
  double threshold = 0.0;
  int clamped = 0;
  find_threshold(row, &threshold, &clamped);
  const int n = static_cast<int>(row.size());
  const double dt = 1.0 / (n - clamped);

  bool kink = false;
  Matrix jac(n, n);
  for (int lam = 0; lam < n; ++lam) {
    const double residual = row[lam] - threshold;
    if (std::abs(residual) <= kKinkTolerance) kink = true;
    const double scale = residual >= 0.0 ? 1.0 : alpha;
    for (int mu = 0; mu < n; ++mu) {
      const double dthr = row[mu] > threshold ? dt : 0.0;
      jac(lam, mu) = scale * ((lam == mu ? 1.0 : 0.0) - dthr);
    }
  }
  if (at_kink) *at_kink = kink;
  return jac;
}

RelaxedState project_field(const Matrix& field, double alpha) {
  RelaxedState state;
  state.mode = alpha == 0.0 ? SimplexMode::kStrict : SimplexMode::kLeaky;
  state.q.resize(field.rows(), field.cols());
  std::vector<double> row(field.cols());
  for (Eigen::Index i = 0; i < field.rows(); ++i) {
    for (Eigen::Index l = 0; l < field.cols(); ++l) row[l] = field(i, l);
    try {
      const ProjectionResult projected = project_row_leaky(row, alpha);
      for (Eigen::Index l = 0; l < field.cols(); ++l)
        state.q(i, l) = projected.q[l];
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("pixel " + std::to_string(i) + ": " + err.what());
    }
  }
  return state;
}

}  // namespace gridcrf
