#pragma once

#include "gridcrf/instance.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace gridcrf {

// Recipe for a synthetic instance; every generator is a pure function of
// its spec, so instances are reproducible from the seed alone.
struct TaskSpec {
  std::string generator = "potts-random";  // potts-random | stripes | thin-vertical
  int height = 8;
  int width = 8;
  int labels = 2;
  int spatial_radius = 1;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct SynthResult {
  CrfInstance instance;
  std::optional<DiscreteLabeling> truth;
};

// Random unary scores (Dirichlet rows) with a symmetric Potts spatial
// bank of random strength. No ground truth.
SynthResult gen_potts_random(const TaskSpec& spec);

// Vertical label stripes (column c gets label c mod L) with unary scores
// corrupted by label-flip noise at the given rate. Ground truth included.
SynthResult gen_stripes(const TaskSpec& spec);

// Thin vertical bars of label 1 on a label-0 background, noisy unaries.
SynthResult gen_thin_vertical(const TaskSpec& spec);

// Dispatch on spec.generator; throws std::invalid_argument on unknown names.
SynthResult generate(const TaskSpec& spec);

}  // namespace gridcrf
