#include "gridcrf/instance.hpp"

#include "gridcrf/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gridcrf {

UnaryField make_unary(const Matrix& scores, double weight, double floor) {
  if (floor < 0)
    throw std::invalid_argument("make_unary: floor must be non-negative");
  UnaryField field;
  field.scores = scores;
  field.weight = weight;
  field.floor = floor;
  field.psi.resize(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i)
    for (Eigen::Index l = 0; l < scores.cols(); ++l) {
      const double z = scores(i, l);
      if (!(z >= 0.0 && z <= 1.0))
        throw std::invalid_argument("make_unary: score out of [0,1] at pixel " +
                                    std::to_string(i) + ", label " +
                                    std::to_string(l));
      if (z + floor <= 0.0)
        throw std::invalid_argument(
            "make_unary: score + floor is not positive at pixel " +
            std::to_string(i) + ", label " + std::to_string(l));
      field.psi(i, l) = -weight * std::log(z + floor);
    }
  if (!field.psi.allFinite())
    throw std::invalid_argument("make_unary: non-finite potential");
  return field;
}

void CrfInstance::validate() const {
  if (labels < 2) throw std::invalid_argument("instance: needs at least 2 labels");
  if (geometry.height < 1 || geometry.width < 1)
    throw std::invalid_argument("instance: empty grid");
  if (geometry.spatial_radius < 0)
    throw std::invalid_argument("instance: negative spatial radius");
  const int n = geometry.pixels();
  if (unary.pixels() != n || unary.labels() != labels)
    throw std::invalid_argument("instance: unary shape mismatch");
  if (!unary.psi.allFinite() || !unary.scores.allFinite())
    throw std::invalid_argument("instance: non-finite unary field");
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < labels; ++l) {
      const double expect = -unary.weight * std::log(unary.scores(i, l) + unary.floor);
      if (unary.psi(i, l) != expect)
        throw std::invalid_argument("instance: unary potential does not match scores");
    }
  if (spatial.labels != labels || spatial.radius != geometry.spatial_radius)
    throw std::invalid_argument("instance: spatial bank shape mismatch");
  if (static_cast<int>(spatial.taps.size()) != spatial.size())
    throw std::invalid_argument("instance: spatial tap count mismatch");
  for (double t : spatial.taps)
    if (!std::isfinite(t)) throw std::invalid_argument("instance: non-finite spatial tap");
  for (int lam = 0; lam < labels; ++lam)
    for (int mu = 0; mu < labels; ++mu)
      if (spatial.tap(lam, mu, 0, 0) != 0.0)
        throw std::invalid_argument("instance: spatial self-tap must be zero");
  if (bilateral.has_value() != features.has_value())
    throw std::invalid_argument("instance: bilateral bank and features must come together");
  if (bilateral) {
    if (bilateral->labels != labels)
      throw std::invalid_argument("instance: bilateral bank label mismatch");
    if (static_cast<int>(bilateral->taps.size()) != bilateral->size())
      throw std::invalid_argument("instance: bilateral tap count mismatch");
    for (double t : bilateral->taps)
      if (!std::isfinite(t))
        throw std::invalid_argument("instance: non-finite bilateral tap");
    if (features->pixels() != n)
      throw std::invalid_argument("instance: feature field shape mismatch");
    if (features->values.cols() != 5)
      throw std::invalid_argument("instance: features must be 5-dimensional");
    if (features->theta_p <= 0 || features->theta_c <= 0)
      throw std::invalid_argument("instance: feature scales must be positive");
  }
}

namespace {

void check_labeling(const CrfInstance& inst, const DiscreteLabeling& x) {
  if (static_cast<int>(x.size()) != inst.geometry.pixels())
    throw std::invalid_argument("labeling length does not match pixel count");
  for (int v : x)
    if (v < 0 || v >= inst.labels)
      throw std::invalid_argument("label out of range");
}

void check_state(const CrfInstance& inst, const RelaxedState& q) {
  if (q.pixels() != inst.geometry.pixels() || q.labels() != inst.labels)
    throw std::invalid_argument("state shape does not match instance");
  if (q.mode == SimplexMode::kStrict) {
    for (int i = 0; i < q.pixels(); ++i) {
      if (std::abs(q.q.row(i).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("strict state row " + std::to_string(i) +
                                    " does not sum to one");
    }
  }
}

}  // namespace

double energy_discrete(const CrfInstance& inst, const DiscreteLabeling& x) {
  check_labeling(inst, x);
  const GridGeometry& g = inst.geometry;
  const int n = g.pixels();
  double energy = 0.0;
  for (int i = 0; i < n; ++i) energy += inst.unary.psi(i, x[i]);

  const int r = g.spatial_radius;
  for (int i = 0; i < n; ++i) {
    const int px = g.pixel_x(i), py = g.pixel_y(i);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!g.contains(px + dx, py + dy)) continue;
        const int j = g.index(px + dx, py + dy);
        energy += inst.spatial.tap(x[i], x[j], dx, dy);
      }
  }

  if (inst.bilateral) {
    FeatureLattice lattice(*inst.features, inst.bilateral->radius);
    for (int i = 0; i < n; ++i) {
      const auto ci = lattice.cell_of(i);
      for (int j : lattice.neighbours(i)) {
        const auto cj = lattice.cell_of(j);
        std::array<int, 5> d{ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2],
                             ci[3] - cj[3], ci[4] - cj[4]};
        energy += inst.bilateral->tap(x[i], x[j], d);
      }
    }
  }
  return energy;
}

double energy_relaxed(const CrfInstance& inst, const RelaxedState& q) {
  check_state(inst, q);
  const GridGeometry& g = inst.geometry;
  const int n = g.pixels();
  const int labels = inst.labels;
  double energy = 0.0;
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < labels; ++l) energy += inst.unary.psi(i, l) * q.q(i, l);

  const int r = g.spatial_radius;
  for (int i = 0; i < n; ++i) {
    const int px = g.pixel_x(i), py = g.pixel_y(i);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!g.contains(px + dx, py + dy)) continue;
        const int j = g.index(px + dx, py + dy);
        for (int lam = 0; lam < labels; ++lam) {
          double acc = 0.0;
          for (int mu = 0; mu < labels; ++mu)
            acc += inst.spatial.tap(lam, mu, dx, dy) * q.q(j, mu);
          energy += q.q(i, lam) * acc;
        }
      }
  }

  if (inst.bilateral) {
    FeatureLattice lattice(*inst.features, inst.bilateral->radius);
    for (int i = 0; i < n; ++i) {
      const auto ci = lattice.cell_of(i);
      for (int j : lattice.neighbours(i)) {
        const auto cj = lattice.cell_of(j);
        std::array<int, 5> d{ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2],
                             ci[3] - cj[3], ci[4] - cj[4]};
        for (int lam = 0; lam < labels; ++lam) {
          double acc = 0.0;
          for (int mu = 0; mu < labels; ++mu)
            acc += inst.bilateral->tap(lam, mu, d) * q.q(j, mu);
          energy += q.q(i, lam) * acc;
        }
      }
    }
  }
  return energy;
}

CrfInstance symmetrize_kernels(const CrfInstance& inst) {
  CrfInstance out = inst;
  out.spatial.symmetrize();
  out.spatial.pin_self_taps();
  if (out.bilateral) out.bilateral->symmetrize();
  return out;
}

double step_size_bound(const CrfInstance& inst, double cap) {
  const GridGeometry& g = inst.geometry;
  const int n = g.pixels();
  const int labels = inst.labels;
  const int r = g.spatial_radius;

  FeatureLattice lattice;
  if (inst.bilateral) lattice = FeatureLattice(*inst.features, inst.bilateral->radius);

  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    const int px = g.pixel_x(i), py = g.pixel_y(i);
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        if (dx == 0 && dy == 0) continue;
        if (!g.contains(px + dx, py + dy)) continue;
        for (int lam = 0; lam < labels; ++lam)
          for (int mu = 0; mu < labels; ++mu)
            row += std::abs(inst.spatial.tap(lam, mu, dx, dy));
      }
    if (inst.bilateral) {
      const auto ci = lattice.cell_of(i);
      for (int j : lattice.neighbours(i)) {
        const auto cj = lattice.cell_of(j);
        std::array<int, 5> d{ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2],
                             ci[3] - cj[3], ci[4] - cj[4]};
        for (int lam = 0; lam < labels; ++lam)
          for (int mu = 0; mu < labels; ++mu)
            row += std::abs(inst.bilateral->tap(lam, mu, d));
      }
    }
    worst = std::max(worst, row);
  }
  if (worst == 0.0) return cap;
  return std::min(cap, 1.0 / (2.0 * worst));
}

}  // namespace gridcrf
