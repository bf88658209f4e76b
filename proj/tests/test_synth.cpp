#include <doctest.h>

#include "gridcrf/oracle.hpp"
#include "gridcrf/synth.hpp"

#include <cmath>

using namespace gridcrf;

namespace {

int argmax_label(const Matrix& scores, int pixel) {
  int best = 0;
  for (int l = 1; l < scores.cols(); ++l)
    if (scores(pixel, l) > scores(pixel, best)) best = l;
  return best;
}

int disagreements(const Matrix& scores, const DiscreteLabeling& truth) {
  int count = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (argmax_label(scores, static_cast<int>(i)) != truth[i]) ++count;
  return count;
}

}  // namespace

TEST_CASE("generators are deterministic in the seed") {
  const TaskSpec spec{.generator = "potts-random", .height = 5, .width = 7,
                      .labels = 3, .spatial_radius = 1, .noise = 0.0, .seed = 42};
  const SynthResult a = generate(spec);
  const SynthResult b = generate(spec);
  CHECK((a.instance.unary.scores - b.instance.unary.scores).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(a.instance.spatial.taps == b.instance.spatial.taps);

  TaskSpec other = spec;
  other.seed = 43;
  const SynthResult c = generate(other);
  CHECK((a.instance.unary.scores - c.instance.unary.scores).cwiseAbs().maxCoeff() >
        0.0);
}

TEST_CASE("potts-random banks are symmetric Potts") {
  const SynthResult r = generate({.generator = "potts-random", .height = 4,
                                  .width = 4, .labels = 3, .spatial_radius = 2,
                                  .noise = 0.0, .seed = 7});
  CHECK(r.instance.spatial.is_symmetric(0.0));
  for (int lam = 0; lam < 3; ++lam) {
    CHECK(r.instance.spatial.tap(lam, lam, 1, 1) == 0.0);
    CHECK(r.instance.spatial.tap(lam, lam, 0, 0) == 0.0);
  }
  CHECK(r.instance.spatial.tap(0, 1, 1, 0) > 0.0);
  CHECK_FALSE(r.truth.has_value());
  CHECK_NOTHROW(r.instance.validate());
}

TEST_CASE("stripes") {
  SUBCASE("zero noise aligns scores with the truth") {
    const SynthResult r = generate({.generator = "stripes", .height = 6,
                                    .width = 6, .labels = 2, .spatial_radius = 1,
                                    .noise = 0.0, .seed = 3});
    REQUIRE(r.truth.has_value());
    CHECK(disagreements(r.instance.unary.scores, *r.truth) == 0);
    for (int i = 0; i < 36; ++i) CHECK((*r.truth)[i] == (i % 6) % 2);
  }

  SUBCASE("flip count is reproducible under a fixed seed") {
    const TaskSpec spec{.generator = "stripes", .height = 8, .width = 8,
                        .labels = 2, .spatial_radius = 1, .noise = 0.3, .seed = 9};
    const SynthResult a = generate(spec);
    const SynthResult b = generate(spec);
    const int flips = disagreements(a.instance.unary.scores, *a.truth);
    CHECK(flips == disagreements(b.instance.unary.scores, *b.truth));
    CHECK(flips > 0);
    CHECK(flips < 40);  // rate 0.3 over 64 pixels
  }

  SUBCASE("truth labels stay in range") {
    const SynthResult r = generate({.generator = "stripes", .height = 5,
                                    .width = 9, .labels = 4, .spatial_radius = 1,
                                    .noise = 0.5, .seed = 11});
    for (int v : *r.truth) {
      CHECK(v >= 0);
      CHECK(v < 4);
    }
    CHECK_NOTHROW(r.instance.validate());
  }
}

TEST_CASE("thin-vertical bars") {
  const SynthResult r = generate({.generator = "thin-vertical", .height = 8,
                                  .width = 8, .labels = 2, .spatial_radius = 1,
                                  .noise = 0.2, .seed = 21});
  REQUIRE(r.truth.has_value());
  int bars = 0;
  for (int x = 0; x < 8; ++x) {
    bool full_column = true;
    for (int y = 0; y < 8; ++y)
      if ((*r.truth)[y * 8 + x] != 1) full_column = false;
    if (full_column) ++bars;
  }
  CHECK(bars >= 1);
  CHECK_NOTHROW(r.instance.validate());
}

TEST_CASE("unknown generators are refused") {
  CHECK_THROWS_AS(generate({.generator = "perlin"}), std::invalid_argument);
}

TEST_CASE("default-size instances fit the desk-scale budgets") {
  const SynthResult big = generate({.generator = "stripes", .height = 16,
                                    .width = 16, .labels = 4, .spatial_radius = 4,
                                    .noise = 0.3, .seed = 1});
  CHECK_NOTHROW(big.instance.validate());
  OracleBudget budget;
  CHECK(big.instance.geometry.pixels() <= budget.max_pixels_dense);

  const SynthResult small = generate({.generator = "potts-random", .height = 3,
                                      .width = 3, .labels = 2, .spatial_radius = 1,
                                      .noise = 0.0, .seed = 2});
  CHECK_NOTHROW(exhaustive_min(small.instance, budget));
}
