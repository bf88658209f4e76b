#include "gridcrf/synth.hpp"

#include "gridcrf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridcrf {

namespace {

Matrix scores_from_rng(Rng& rng, int pixels, int labels) {
  Matrix scores(pixels, labels);
  for (int i = 0; i < pixels; ++i) {
    const std::vector<double> row = rng.dirichlet_row(labels);
    for (int l = 0; l < labels; ++l) scores(i, l) = row[l];
  }
  return scores;
}

// Soft scores favouring `label`, slightly jittered so rows are never at
// a projection kink.
void soft_row(Rng& rng, Matrix& scores, int pixel, int label, int labels) {
  const double lead = 0.55 + 0.1 * rng.uniform();
  const double rest = (1.0 - lead) / (labels - 1);
  for (int l = 0; l < labels; ++l) scores(pixel, l) = l == label ? lead : rest;
}

CrfInstance assemble(const TaskSpec& spec, Matrix scores,
                     SpatialKernelBank bank) {
  CrfInstance inst;
  inst.geometry = {spec.height, spec.width, spec.spatial_radius};
  inst.labels = spec.labels;
  inst.unary = make_unary(scores, 0.5, 1e-8);
  inst.spatial = std::move(bank);
  inst.validate();
  return inst;
}

DiscreteLabeling flip_noise(Rng& rng, const DiscreteLabeling& truth, int labels,
                            double rate) {
  DiscreteLabeling noisy = truth;
  for (size_t i = 0; i < noisy.size(); ++i) {
    if (rng.uniform() < rate) {
      int other = rng.uniform_int(0, labels - 2);
      if (other >= noisy[i]) ++other;
      noisy[i] = other;
    }
  }
  return noisy;
}

}  // namespace

SynthResult gen_potts_random(const TaskSpec& spec) {
  if (spec.labels < 2) throw std::invalid_argument("gen_potts_random: labels < 2");
  Rng rng(spec.seed);
  Matrix scores = scores_from_rng(rng, spec.height * spec.width, spec.labels);

  SpatialKernelBank bank =
      SpatialKernelBank::zeros(spec.labels, spec.spatial_radius);
  // Draw the total absolute pairwise mass seen by an interior pixel and
  // spread it over the window, so step sizes near 0.5 stay in the stable
  // regime whatever the radius and label count.
  const int neighbours =
      (2 * spec.spatial_radius + 1) * (2 * spec.spatial_radius + 1) - 1;
  const double mass = rng.uniform(0.3, 1.5);
  const double strength =
      mass / (neighbours * spec.labels * (spec.labels - 1));
  for (int lam = 0; lam < spec.labels; ++lam)
    for (int mu = 0; mu < spec.labels; ++mu) {
      if (lam == mu) continue;
      for (int dy = -spec.spatial_radius; dy <= spec.spatial_radius; ++dy)
        for (int dx = -spec.spatial_radius; dx <= spec.spatial_radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          bank.tap(lam, mu, dx, dy) = strength;
        }
    }

  SynthResult result;
  result.instance = assemble(spec, std::move(scores), std::move(bank));
  return result;
}

SynthResult gen_stripes(const TaskSpec& spec) {
  if (spec.labels < 2) throw std::invalid_argument("gen_stripes: labels < 2");
  Rng rng(spec.seed);
  const int n = spec.height * spec.width;

  DiscreteLabeling truth(n);
  for (int i = 0; i < n; ++i) truth[i] = (i % spec.width) % spec.labels;
  const DiscreteLabeling observed = flip_noise(rng, truth, spec.labels, spec.noise);

  Matrix scores(n, spec.labels);
  for (int i = 0; i < n; ++i)
    soft_row(rng, scores, i, observed[i], spec.labels);

  SynthResult result;
  result.instance = assemble(
      spec, std::move(scores),
      SpatialKernelBank::zeros(spec.labels, spec.spatial_radius));
  result.truth = truth;
  return result;
}

SynthResult gen_thin_vertical(const TaskSpec& spec) {
  if (spec.labels < 2) throw std::invalid_argument("gen_thin_vertical: labels < 2");
  Rng rng(spec.seed);
  const int n = spec.height * spec.width;

  // A few single-column bars of label 1 on a label-0 background.
  DiscreteLabeling truth(n, 0);
  const int bars = std::max(1, spec.width / 4);
  for (int b = 0; b < bars; ++b) {
    const int column = rng.uniform_int(0, spec.width - 1);
    for (int y = 0; y < spec.height; ++y)
      truth[y * spec.width + column] = 1 % spec.labels;
  }
  const DiscreteLabeling observed = flip_noise(rng, truth, spec.labels, spec.noise);

  Matrix scores(n, spec.labels);
  for (int i = 0; i < n; ++i)
    soft_row(rng, scores, i, observed[i], spec.labels);

  SynthResult result;
  result.instance = assemble(
      spec, std::move(scores),
      SpatialKernelBank::zeros(spec.labels, spec.spatial_radius));
  result.truth = truth;
  return result;
}

SynthResult generate(const TaskSpec& spec) {
  if (spec.generator == "potts-random") return gen_potts_random(spec);
  if (spec.generator == "stripes") return gen_stripes(spec);
  if (spec.generator == "thin-vertical") return gen_thin_vertical(spec);
  throw std::invalid_argument("unknown generator: " + spec.generator);
}

}  // namespace gridcrf
