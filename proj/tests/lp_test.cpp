#include <doctest.h>

#include "spii/lp.hpp"

using namespace spii;

TEST_CASE("lp: simple bounded maximum") {
  // max x + y  s.t.  x + y <= 1, x <= 0.6
  LpSolution sol = lp_maximize({1.0, 1.0}, {{{1.0, 1.0}, LpRel::kLe, 1.0},
                                            {{1.0, 0.0}, LpRel::kLe, 0.6}});
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(1.0));
}

TEST_CASE("lp: equality constraints give a vertex") {
  // max 2x + y  s.t.  x + y = 1
  LpSolution sol = lp_maximize({2.0, 1.0}, {{{1.0, 1.0}, LpRel::kEq, 1.0}});
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(2.0));
  CHECK(sol.x[0] == doctest::Approx(1.0));
  CHECK(sol.x[1] == doctest::Approx(0.0));
}

TEST_CASE("lp: infeasible detected") {
  // x >= 2 and x <= 1
  LpSolution sol = lp_maximize({1.0}, {{{1.0}, LpRel::kGe, 2.0},
                                       {{1.0}, LpRel::kLe, 1.0}});
  CHECK(sol.status == LpStatus::kInfeasible);
}

TEST_CASE("lp: unbounded detected") {
  LpSolution sol = lp_maximize({1.0}, {{{1.0}, LpRel::kGe, 0.0}});
  CHECK(sol.status == LpStatus::kUnbounded);
}

TEST_CASE("lp: negative rhs normalization") {
  // max -x  s.t.  -x <= -2  (i.e. x >= 2)
  LpSolution sol = lp_maximize({-1.0}, {{{-1.0}, LpRel::kLe, -2.0}});
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.x[0] == doctest::Approx(2.0));
}

TEST_CASE("lp: degenerate ties do not cycle") {
  // Klee-Minty-flavored degenerate system, small.
  std::vector<LpRow> rows = {
      {{1.0, 0.0, 0.0}, LpRel::kLe, 1.0},
      {{4.0, 1.0, 0.0}, LpRel::kLe, 8.0},
      {{8.0, 4.0, 1.0}, LpRel::kLe, 64.0},
      {{1.0, 1.0, 1.0}, LpRel::kGe, 0.0},
  };
  LpSolution sol = lp_maximize({4.0, 2.0, 1.0}, rows);
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(64.0));
}

TEST_CASE("lp: simplex over probability vector") {
  // max r . v  over the probability simplex picks the best coordinate.
  std::vector<LpRow> rows = {{{1.0, 1.0, 1.0}, LpRel::kEq, 1.0}};
  LpSolution sol = lp_maximize({0.2, 0.9, 0.5}, rows);
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.objective == doctest::Approx(0.9));
  CHECK(sol.x[1] == doctest::Approx(1.0));
}
