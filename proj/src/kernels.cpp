#include "gridcrf/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace gridcrf {

SpatialKernelBank SpatialKernelBank::zeros(int labels, int radius) {
  if (labels < 1 || radius < 0)
    throw std::invalid_argument("spatial bank: labels must be >= 1, radius >= 0");
  SpatialKernelBank bank;
  bank.labels = labels;
  bank.radius = radius;
  bank.taps.assign(static_cast<size_t>(labels) * labels *
                       (2 * radius + 1) * (2 * radius + 1),
                   0.0);
  return bank;
}

void SpatialKernelBank::pin_self_taps() {
  for (int lam = 0; lam < labels; ++lam)
    for (int mu = 0; mu < labels; ++mu) tap(lam, mu, 0, 0) = 0.0;
}

void SpatialKernelBank::symmetrize() {
  SpatialKernelBank mirror = transposed();
  for (size_t i = 0; i < taps.size(); ++i)
    taps[i] = 0.5 * (taps[i] + mirror.taps[i]);
}

bool SpatialKernelBank::is_symmetric(double tol) const {
  SpatialKernelBank mirror = transposed();
  for (size_t i = 0; i < taps.size(); ++i)
    if (std::abs(taps[i] - mirror.taps[i]) > tol) return false;
  return true;
}

SpatialKernelBank SpatialKernelBank::transposed() const {
  SpatialKernelBank out = zeros(labels, radius);
  for (int lam = 0; lam < labels; ++lam)
    for (int mu = 0; mu < labels; ++mu)
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx)
          out.tap(lam, mu, dx, dy) = tap(mu, lam, -dx, -dy);
  return out;
}

int BilateralKernelBank::window() const {
  int w = 1;
  for (int d = 0; d < 5; ++d) w *= side();
  return w;
}

int BilateralKernelBank::offset_index(const std::array<int, 5>& d) const {
  int idx = 0;
  for (int k = 0; k < 5; ++k) idx = idx * side() + (d[k] + radius);
  return idx;
}

BilateralKernelBank BilateralKernelBank::zeros(int labels, int radius) {
  if (labels < 1 || radius < 0)
    throw std::invalid_argument("bilateral bank: labels must be >= 1, radius >= 0");
  BilateralKernelBank bank;
  bank.labels = labels;
  bank.radius = radius;
  bank.taps.assign(static_cast<size_t>(labels) * labels * bank.window(), 0.0);
  return bank;
}

std::vector<std::array<int, 5>> BilateralKernelBank::offsets(int radius) {
  std::vector<std::array<int, 5>> out;
  const int side = 2 * radius + 1;
  int count = 1;
  for (int d = 0; d < 5; ++d) count *= side;
  out.reserve(count);
  std::array<int, 5> d;
  for (int a = -radius; a <= radius; ++a)
    for (int b = -radius; b <= radius; ++b)
      for (int c = -radius; c <= radius; ++c)
        for (int e = -radius; e <= radius; ++e)
          for (int f = -radius; f <= radius; ++f) {
            d = {a, b, c, e, f};
            out.push_back(d);
          }
  return out;
}

void BilateralKernelBank::symmetrize() {
  BilateralKernelBank mirror = transposed();
  for (size_t i = 0; i < taps.size(); ++i)
    taps[i] = 0.5 * (taps[i] + mirror.taps[i]);
}

bool BilateralKernelBank::is_symmetric(double tol) const {
  BilateralKernelBank mirror = transposed();
  for (size_t i = 0; i < taps.size(); ++i)
    if (std::abs(taps[i] - mirror.taps[i]) > tol) return false;
  return true;
}

BilateralKernelBank BilateralKernelBank::transposed() const {
  BilateralKernelBank out = zeros(labels, radius);
  for (const auto& d : offsets(radius)) {
    std::array<int, 5> neg{-d[0], -d[1], -d[2], -d[3], -d[4]};
    for (int lam = 0; lam < labels; ++lam)
      for (int mu = 0; mu < labels; ++mu)
        out.tap(lam, mu, d) = tap(mu, lam, neg);
  }
  return out;
}

FeatureField make_features(const GridGeometry& geometry,
                           const std::vector<unsigned char>& rgb,
                           double theta_p, double theta_c) {
  if (theta_p <= 0 || theta_c <= 0)
    throw std::invalid_argument("feature scales must be strictly positive");
  const int n = geometry.pixels();
  if (static_cast<int>(rgb.size()) != 3 * n)
    throw std::invalid_argument("rgb buffer does not match grid size");
  FeatureField field;
  field.theta_p = theta_p;
  field.theta_c = theta_c;
  field.values.resize(n, 5);
  for (int i = 0; i < n; ++i) {
    field.values(i, 0) = geometry.pixel_x(i) / theta_p;
    field.values(i, 1) = geometry.pixel_y(i) / theta_p;
    for (int c = 0; c < 3; ++c)
      field.values(i, 2 + c) = rgb[3 * i + c] / theta_c;
  }
  return field;
}

std::array<int, 5> feature_cell(const FeatureField& features, int pixel) {
  std::array<int, 5> cell;
  for (int d = 0; d < 5; ++d)
    cell[d] = static_cast<int>(std::floor(features.values(pixel, d)));
  return cell;
}

}  // namespace gridcrf
