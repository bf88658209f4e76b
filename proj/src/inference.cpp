#include "gridcrf/inference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gridcrf {

namespace {

std::array<int, 5> cell_offset(const std::array<int, 5>& a,
                               const std::array<int, 5>& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3], a[4] - b[4]};
}

void require_row_stochastic(const Matrix& q, const char* who) {
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    if (std::abs(q.row(i).sum() - 1.0) > 1e-9)
      throw std::invalid_argument(std::string(who) + ": row " +
                                  std::to_string(i) + " does not sum to one");
}

}  // namespace

Matrix spatial_response(const Matrix& q, const GridGeometry& geometry,
                        const SpatialKernelBank& bank) {
  const int n = geometry.pixels();
  const int labels = bank.labels;
  if (static_cast<int>(q.rows()) != n || static_cast<int>(q.cols()) != labels)
    throw std::invalid_argument("spatial_response: shape mismatch");
  const int r = bank.radius;

  Matrix out = Matrix::Zero(n, labels);
  for (int i = 0; i < n; ++i) {
    const int px = geometry.pixel_x(i), py = geometry.pixel_y(i);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!geometry.contains(px + dx, py + dy)) continue;
        const int j = geometry.index(px + dx, py + dy);
        for (int lam = 0; lam < labels; ++lam) {
          double acc = 0.0;
          for (int mu = 0; mu < labels; ++mu)
            acc += bank.tap(lam, mu, dx, dy) * q(j, mu);
          out(i, lam) += acc;
        }
      }
  }
  return out;
}

Matrix bilateral_response(const Matrix& q, const FeatureField& features,
                          const BilateralKernelBank& bank,
                          const FeatureLattice& lattice) {
  const int n = features.pixels();
  const int labels = bank.labels;
  if (static_cast<int>(q.rows()) != n || static_cast<int>(q.cols()) != labels)
    throw std::invalid_argument("bilateral_response: shape mismatch");

  Matrix out = Matrix::Zero(n, labels);
  for (int i = 0; i < n; ++i) {
    const auto& ci = lattice.cell_of(i);
    // neighbours() yields ascending pixel order, so the accumulation
    // order matches the dense reference exactly.
    for (int j : lattice.neighbours(i)) {
      const auto d = cell_offset(ci, lattice.cell_of(j));
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

Matrix energy_gradient(const CrfInstance& inst, const Matrix& q,
                       const FeatureLattice* lattice) {
  Matrix grad = inst.unary.psi;
  grad += 2.0 * spatial_response(q, inst.geometry, inst.spatial);
  if (inst.bilateral) {
    FeatureLattice local;
    if (!lattice) {
      local = FeatureLattice(*inst.features, inst.bilateral->radius);
      lattice = &local;
    }
    grad += 2.0 * bilateral_response(q, *inst.features, *inst.bilateral, *lattice);
  }
  return grad;
}

RelaxedState pgd_step(const RelaxedState& q, const CrfInstance& inst,
                      const InferenceConfig& config,
                      const FeatureLattice* lattice, Matrix* pre_projection) {
  double gamma = config.step_size;
  if (config.safe_step) gamma = std::min(gamma, step_size_bound(inst));
  Matrix descended = q.q - gamma * energy_gradient(inst, q.q, lattice);
  if (pre_projection) *pre_projection = descended;
  return project_field(descended, config.leak);
}

InferenceTrace run_pgd(const CrfInstance& inst, const RelaxedState& q0,
                       const InferenceConfig& config) {
  if (config.iterations < 0) throw std::invalid_argument("run_pgd: negative iteration count");
  require_row_stochastic(q0.q, "run_pgd");

  FeatureLattice lattice;
  const FeatureLattice* lattice_ptr = nullptr;
  if (inst.bilateral) {
    lattice = FeatureLattice(*inst.features, inst.bilateral->radius);
    lattice_ptr = &lattice;
  }

  InferenceConfig effective = config;
  if (config.safe_step) {
    effective.step_size = std::min(config.step_size, step_size_bound(inst));
    effective.safe_step = false;
  }
  const bool strict = config.leak == 0.0;

  InferenceTrace trace;
  trace.method = "pgd";
  trace.mode = strict ? SimplexMode::kStrict : SimplexMode::kLeaky;

  RelaxedState state = q0;
  trace.states.push_back(state.q);
  trace.energies.push_back(energy_relaxed(inst, state));
  if (strict) trace.kl.push_back(kl_objective(inst, state));

  for (int t = 0; t < config.iterations; ++t) {
    Matrix pre;
    state = pgd_step(state, inst, effective, lattice_ptr, &pre);
    const double energy =
        energy_relaxed(inst, RelaxedState{state.q, SimplexMode::kLeaky});
    if (!std::isfinite(energy))
      throw std::runtime_error("run_pgd: non-finite energy at step " +
                               std::to_string(t + 1));
    if (energy > trace.energies.back() + 1e-6)
      trace.warnings.push_back("energy increased at step " + std::to_string(t + 1) +
                               " (" + std::to_string(trace.energies.back()) +
                               " -> " + std::to_string(energy) + ")");
    trace.pre_projection.push_back(std::move(pre));
    trace.states.push_back(state.q);
    trace.energies.push_back(energy);
    if (strict) trace.kl.push_back(kl_objective(inst, state));
  }
  return trace;
}

RelaxedState init_q0(const Matrix& scores, bool* renormalized) {
  RelaxedState state;
  state.q = scores;
  bool warned = false;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double sum = scores.row(i).sum();
    if (!(sum > 0.0))
      throw std::invalid_argument("init_q0: row " + std::to_string(i) +
                                  " has non-positive sum");
    const double deviation = std::abs(sum - 1.0);
    if (deviation > 1e-6) warned = true;
    // Smaller deviations are still renormalized silently so the strict
    // row-sum invariant holds downstream.
    if (deviation > 1e-9) state.q.row(i) /= sum;
  }
  if (renormalized) *renormalized = warned;
  return state;
}

RelaxedState mean_field_step(const RelaxedState& q, const CrfInstance& inst,
                             const FeatureLattice* lattice) {
  Matrix clamped = q.q.cwiseMax(1e-20);
  const Matrix grad = energy_gradient(inst, clamped, lattice);
  RelaxedState next;
  next.mode = SimplexMode::kStrict;
  next.q.resize(grad.rows(), grad.cols());
  for (Eigen::Index i = 0; i < grad.rows(); ++i) {
    const double shift = -grad.row(i).maxCoeff();  // max of -grad
    double norm = 0.0;
    for (Eigen::Index l = 0; l < grad.cols(); ++l) {
      const double e = std::exp(-grad(i, l) - shift);
      next.q(i, l) = e;
      norm += e;
    }
    next.q.row(i) /= norm;
  }
  return next;
}

InferenceTrace run_mean_field(const CrfInstance& inst, const RelaxedState& q0,
                              int iterations) {
  if (iterations < 0)
    throw std::invalid_argument("run_mean_field: negative iteration count");
  require_row_stochastic(q0.q, "run_mean_field");

  FeatureLattice lattice;
  const FeatureLattice* lattice_ptr = nullptr;
  if (inst.bilateral) {
    lattice = FeatureLattice(*inst.features, inst.bilateral->radius);
    lattice_ptr = &lattice;
  }

  InferenceTrace trace;
  trace.method = "mean-field";
  trace.mode = SimplexMode::kStrict;

  RelaxedState state = q0;
  trace.states.push_back(state.q);
  trace.energies.push_back(energy_relaxed(inst, state));
  trace.kl.push_back(kl_objective(inst, state));
  for (int t = 0; t < iterations; ++t) {
    state = mean_field_step(state, inst, lattice_ptr);
    trace.states.push_back(state.q);
    trace.energies.push_back(energy_relaxed(inst, state));
    trace.kl.push_back(kl_objective(inst, state));
  }
  return trace;
}

double kl_objective(const CrfInstance& inst, const RelaxedState& q) {
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < q.q.rows(); ++i)
    for (Eigen::Index l = 0; l < q.q.cols(); ++l) {
      const double v = q.q(i, l);
      if (v < -1e-12)
        throw std::invalid_argument("kl_objective: negative entry at pixel " +
                                    std::to_string(i));
      if (v > 0.0) entropy -= v * std::log(v);
    }
  return energy_relaxed(inst, q) - entropy;
}

DiscreteLabeling round_sequential(const CrfInstance& inst, const RelaxedState& q) {
  if (q.mode != SimplexMode::kStrict)
    throw std::invalid_argument("round_sequential: project to the simplex first");
  if (q.pixels() != inst.geometry.pixels() || q.labels() != inst.labels)
    throw std::invalid_argument("round_sequential: shape mismatch");
  require_row_stochastic(q.q, "round_sequential");

  const GridGeometry& g = inst.geometry;
  const int n = g.pixels();
  const int labels = inst.labels;
  const int r = g.spatial_radius;

  FeatureLattice lattice;
  if (inst.bilateral) lattice = FeatureLattice(*inst.features, inst.bilateral->radius);

  // Rows of w hold one-hot vectors for already-fixed pixels and the
  // relaxed q for the rest; pixel m's own row never enters its cost.
  Matrix w = q.q;
  DiscreteLabeling x(n, 0);
  std::vector<double> cost(labels);
  for (int m = 0; m < n; ++m) {
    for (int lam = 0; lam < labels; ++lam) cost[lam] = inst.unary.psi(m, lam);

    const int px = g.pixel_x(m), py = g.pixel_y(m);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!g.contains(px + dx, py + dy)) continue;
        const int j = g.index(px + dx, py + dy);
        for (int lam = 0; lam < labels; ++lam) {
          double acc = 0.0;
          for (int mu = 0; mu < labels; ++mu)
            acc += (inst.spatial.tap(lam, mu, dx, dy) +
                    inst.spatial.tap(mu, lam, -dx, -dy)) *
                   w(j, mu);
          cost[lam] += acc;
        }
      }

    if (inst.bilateral) {
      const auto& cm = lattice.cell_of(m);
      for (int j : lattice.neighbours(m)) {
        const auto d = cell_offset(cm, lattice.cell_of(j));
        const std::array<int, 5> neg{-d[0], -d[1], -d[2], -d[3], -d[4]};
        for (int lam = 0; lam < labels; ++lam) {
          double acc = 0.0;
          for (int mu = 0; mu < labels; ++mu)
            acc += (inst.bilateral->tap(lam, mu, d) +
                    inst.bilateral->tap(mu, lam, neg)) *
                   w(j, mu);
          cost[lam] += acc;
        }
      }
    }

    int best = 0;
    for (int lam = 1; lam < labels; ++lam)
      if (cost[lam] < cost[best]) best = lam;
    x[m] = best;
    w.row(m).setZero();
    w(m, best) = 1.0;
  }
  return x;
}

}  // namespace gridcrf
