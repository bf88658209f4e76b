#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace gridcrf {

// Seeded generator with distributions implemented in-house, so streams
// are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi] inclusive, rejection-free modulo bias is
  // irrelevant at the ranges used here.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }
  // Dirichlet(1,...,1): normalized iid exponentials.
  std::vector<double> dirichlet_row(int n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace gridcrf
