#include <doctest.h>

#include "gridcrf/oracle.hpp"
#include "gridcrf/rng.hpp"
#include "gridcrf/simplex.hpp"

#include <cmath>
#include <limits>

using namespace gridcrf;

namespace {

std::vector<double> random_row(Rng& rng, int n, double lo = -1.0, double hi = 1.5) {
  std::vector<double> row(n);
  for (double& v : row) v = rng.uniform(lo, hi);
  return row;
}

double kink_margin(const std::vector<double>& row, double threshold) {
  double margin = std::numeric_limits<double>::infinity();
  for (double v : row) margin = std::min(margin, std::abs(v - threshold));
  return margin;
}

}  // namespace

TEST_CASE("project_row on known points") {
  const ProjectionResult on_simplex = project_row({0.5, 0.5});
  CHECK(on_simplex.q[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(on_simplex.q[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(on_simplex.threshold == doctest::Approx(0.0).epsilon(1e-15));

  const ProjectionResult vertex = project_row({2.0, 0.0});
  CHECK(vertex.q[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(vertex.q[1] == 0.0);
  CHECK(vertex.threshold == doctest::Approx(1.0).epsilon(1e-15));

  const ProjectionResult mixed = project_row({1.2, -0.1, 0.3});
  CHECK(mixed.threshold == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(mixed.q[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(mixed.q[1] == 0.0);
  CHECK(mixed.q[2] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(mixed.clamped == 1);
  CHECK_FALSE(mixed.support[1]);
}

TEST_CASE("projection rejects non-finite input") {
  CHECK_THROWS_AS(project_row({0.1, std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(project_row({std::numeric_limits<double>::infinity(), 0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(project_row({}), std::invalid_argument);
}

TEST_CASE("single-label rows project to one") {
  const ProjectionResult r = project_row({3.7});
  CHECK(r.q[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.threshold == doctest::Approx(2.7).epsilon(1e-15));
}

TEST_CASE("leaky projection") {
  const std::vector<double> row{1.2, -0.1, 0.3};

  SUBCASE("alpha zero matches the strict projection") {
    const ProjectionResult strict = project_row(row);
    const ProjectionResult leaky = project_row_leaky(row, 0.0);
    for (int l = 0; l < 3; ++l) CHECK(leaky.q[l] == strict.q[l]);
  }

  SUBCASE("alpha one is a pure shift") {
    const ProjectionResult r = project_row_leaky(row, 1.0);
    for (int l = 0; l < 3; ++l)
      CHECK(r.q[l] == doctest::Approx(row[l] - r.threshold).epsilon(1e-15));
  }

  SUBCASE("alpha 0.1 scales the clamped entry") {
    const ProjectionResult r = project_row_leaky(row, 0.1);
    CHECK(r.threshold == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(r.q[0] == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(r.q[1] == doctest::Approx(-0.035).epsilon(1e-12));
    CHECK(r.q[2] == doctest::Approx(0.05).epsilon(1e-12));
  }
}

TEST_CASE("projection matches the active-set oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 2 + trial % 9;
    const std::vector<double> row = random_row(rng, n);
    const ProjectionResult fast = project_row(row);
    const std::vector<double> slow = project_oracle(row);
    for (int l = 0; l < n; ++l)
      CHECK(fast.q[l] == doctest::Approx(slow[l]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("project_oracle fixed points and feasibility") {
  const std::vector<double> same = project_oracle({0.5, 0.5});
  CHECK(same[0] == doctest::Approx(0.5));
  const std::vector<double> mixed = project_oracle({1.2, -0.1, 0.3});
  CHECK(mixed[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(mixed[1] == 0.0);
  CHECK(mixed[2] == doctest::Approx(0.05).epsilon(1e-12));

  Rng rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> q = project_oracle(random_row(rng, 4));
    double sum = 0.0;
    for (double v : q) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("projection properties") {
  Rng rng(200);

  SUBCASE("idempotence") {
    for (int trial = 0; trial < 300; ++trial) {
      const std::vector<double> row = random_row(rng, 2 + trial % 5);
      const ProjectionResult once = project_row(row);
      const ProjectionResult twice = project_row(once.q);
      for (size_t l = 0; l < row.size(); ++l)
        CHECK(std::abs(twice.q[l] - once.q[l]) <= 1e-12);
    }
  }

  SUBCASE("order preservation for all alpha") {
    for (double alpha : {0.0, 0.01, 0.3, 1.0}) {
      for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> row = random_row(rng, 4);
        const ProjectionResult r = project_row_leaky(row, alpha);
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            if (row[a] >= row[b]) CHECK(r.q[a] >= r.q[b] - 1e-15);
      }
    }
  }

  SUBCASE("translation invariance") {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> row = random_row(rng, 5);
      const double shift = rng.uniform(-10.0, 10.0);
      std::vector<double> shifted = row;
      for (double& v : shifted) v += shift;
      const ProjectionResult a = project_row(row);
      const ProjectionResult b = project_row(shifted);
      for (int l = 0; l < 5; ++l)
        CHECK(b.q[l] == doctest::Approx(a.q[l]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("projection jacobian closed forms") {
  SUBCASE("interior points get the centering projector") {
    const Matrix jac = projection_jacobian({0.5, 0.5}, 0.0);
    CHECK(jac(0, 0) == doctest::Approx(0.5));
    CHECK(jac(0, 1) == doctest::Approx(-0.5));
    CHECK(jac(1, 0) == doctest::Approx(-0.5));
    CHECK(jac(1, 1) == doctest::Approx(0.5));
  }

  SUBCASE("clamped rows vanish at alpha zero") {
    const Matrix jac = projection_jacobian({1.2, -0.1, 0.3}, 0.0);
    for (int mu = 0; mu < 3; ++mu) CHECK(jac(1, mu) == 0.0);
    // Support rows see the threshold through the support entries only.
    CHECK(jac(0, 0) == doctest::Approx(0.5));
    CHECK(jac(0, 1) == doctest::Approx(0.0));
    CHECK(jac(0, 2) == doctest::Approx(-0.5));
  }
}

TEST_CASE("projection jacobian matches finite differences") {
  Rng rng(321);
  const double h = 1e-6;
  int tested = 0;
  while (tested < 300) {
    const int n = 2 + tested % 6;
    std::vector<double> row = random_row(rng, n);
    const double alpha = (tested % 3 == 0) ? 0.0 : (tested % 3 == 1 ? 0.01 : 0.1);
    if (kink_margin(row, project_row(row).threshold) < 1e-4) continue;
    ++tested;

    const Matrix jac = projection_jacobian(row, alpha);
    for (int mu = 0; mu < n; ++mu) {
      std::vector<double> plus = row, minus = row;
      plus[mu] += h;
      minus[mu] -= h;
      const ProjectionResult fp = project_row_leaky(plus, alpha);
      const ProjectionResult fm = project_row_leaky(minus, alpha);
      for (int lam = 0; lam < n; ++lam) {
        const double fd = (fp.q[lam] - fm.q[lam]) / (2 * h);
        CHECK(std::abs(jac(lam, mu) - fd) < 1e-6);
      }
    }
  }
}

TEST_CASE("project_field") {
  SUBCASE("single row reduces to project_row_leaky") {
    Matrix field(1, 3);
    field << 1.2, -0.1, 0.3;
    const RelaxedState state = project_field(field, 0.0);
    CHECK(state.mode == SimplexMode::kStrict);
    CHECK(state.q(0, 0) == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(state.q(0, 1) == 0.0);
    CHECK(state.q(0, 2) == doctest::Approx(0.05).epsilon(1e-12));
  }

  SUBCASE("row-stochastic input is unchanged") {
    Rng rng(9);
    Matrix field(4, 3);
    for (int i = 0; i < 4; ++i) {
      const auto row = rng.dirichlet_row(3);
      for (int l = 0; l < 3; ++l) field(i, l) = row[l];
    }
    const RelaxedState state = project_field(field, 0.0);
    for (int i = 0; i < 4; ++i)
      for (int l = 0; l < 3; ++l)
        CHECK(state.q(i, l) == doctest::Approx(field(i, l)).epsilon(1e-12));
  }

  SUBCASE("every row passes the oracle") {
    Rng rng(77);
    Matrix field(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int l = 0; l < 3; ++l) field(i, l) = rng.uniform(-1.0, 1.5);
    const RelaxedState state = project_field(field, 0.0);
    for (int i = 0; i < 4; ++i) {
      const std::vector<double> expect =
          project_oracle({field(i, 0), field(i, 1), field(i, 2)});
      for (int l = 0; l < 3; ++l)
        CHECK(state.q(i, l) == doctest::Approx(expect[l]).epsilon(1e-9).scale(1.0));
    }
  }

  SUBCASE("errors carry the pixel index") {
    Matrix field(2, 2);
    field << 0.5, 0.5, std::nan(""), 0.0;
    CHECK_THROWS_WITH_AS(project_field(field, 0.0),
                         doctest::Contains("pixel 1"), std::invalid_argument);
  }

  SUBCASE("leaky output is tagged") {
    Matrix field(1, 2);
    field << 2.0, -1.0;
    CHECK(project_field(field, 0.01).mode == SimplexMode::kLeaky);
  }
}
