#include <doctest.h>

#include "spii/region.hpp"
#include "spii/rng.hpp"

using namespace spii;

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("region membership: two-queue single-server examples") {
  ScheduleSet pi = single_server_set(2);
  CHECK(region_membership(vec2(0.4, 0.4), pi, 1.0));
  CHECK_FALSE(region_membership(vec2(0.5, 0.5), pi, 1.0));  // boundary, not strict
  CHECK_FALSE(region_membership(vec2(0.3, 0.3), pi, 0.5));  // 0.6+0.6 > 1
}

TEST_CASE("region membership is monotone in rho") {
  ScheduleSet pi = single_server_set(2);
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd lam = vec2(rng.next_unit(), rng.next_unit());
    double rho = 0.1 + 0.9 * rng.next_unit();
    if (region_membership(lam, pi, rho)) {
      CHECK(region_membership(lam, pi, std::min(1.0, rho + 0.1)));
      CHECK(region_membership(lam, pi, 1.0));
    }
  }
}

TEST_CASE("proj_boundary: worked examples") {
  ScheduleSet pi = single_server_set(2);
  Eigen::VectorXd p = proj_boundary(vec2(0.25, 0.25), pi);
  CHECK(p(0) == doctest::Approx(0.5));
  CHECK(p(1) == doctest::Approx(0.5));

  p = proj_boundary(vec2(0.8, 0.0), pi);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(0.0));

  ScheduleSet three = make_schedule_set(monotone_closure({{2, 0}, {1, 1}, {0, 2}}));
  p = proj_boundary(vec2(1.0, 1.0), three);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(1.0));

  CHECK_THROWS(proj_boundary(vec2(0.0, 0.0), pi));
}

TEST_CASE("proj_boundary: scale invariance and domination") {
  ScheduleSet pi = make_schedule_set(monotone_closure({{2, 0}, {1, 1}, {0, 2}}));
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    Eigen::VectorXd x = vec2(rng.next_unit() + 1e-3, rng.next_unit() + 1e-3);
    Eigen::VectorXd p1 = proj_boundary(x, pi);
    double c = 0.1 + 5.0 * rng.next_unit();
    Eigen::VectorXd p2 = proj_boundary(c * x, pi);
    CHECK((p1 - p2).lpNorm<Eigen::Infinity>() < 1e-7);
    // Inputs already inside the closed region are only scaled up.
    if (region_membership(x, pi, 1.0))
      for (int i = 0; i < 2; ++i) CHECK(p1(i) >= x(i) - 1e-9);
  }
}

TEST_CASE("proj_boundary agrees with a ray-grid oracle") {
  ScheduleSet pi = make_schedule_set(monotone_closure({{2, 0}, {1, 1}, {0, 2}}));
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x = vec2(0.05 + rng.next_unit(), 0.05 + rng.next_unit());
    x /= x.sum();  // projection is scale-free; normalizing bounds the scan
    // Oracle: scan a in [0, 4] on a 10^4-point grid for the last member point.
    double best = 0.0;
    for (int k = 0; k <= 10000; ++k) {
      double a = 4.0 * k / 10000.0;
      // Membership of a*x in cl(region): strict membership of a slightly
      // shrunk point is a closed-set proxy accurate to grid resolution.
      if (a == 0.0 || region_membership((a * (1.0 - 1e-9)) * x, pi, 1.0))
        best = a;
    }
    Eigen::VectorXd p = proj_boundary(x, pi);
    double a_lp = p(0) / x(0);
    CHECK(a_lp == doctest::Approx(best).epsilon(1e-3));
  }
}

TEST_CASE("maximal directions straddle the boundary") {
  ScheduleSet pi = single_server_set(2);
  for (int idx : maximal_elements(pi)) {
    Eigen::VectorXd d(2);
    for (int i = 0; i < 2; ++i)
      d(i) = static_cast<double>(pi.schedules[idx][i]);
    CHECK(region_membership(0.9 * d, pi, 1.0));
    CHECK_FALSE(region_membership(d, pi, 1.0));
    Eigen::VectorXd above = d + 0.05 * Eigen::VectorXd::Ones(2);
    CHECK_FALSE(region_membership(above, pi, 1.0));
  }
}

TEST_CASE("convex decomposition reconstructs boundary targets") {
  ScheduleSet pi = make_schedule_set(monotone_closure({{2, 0}, {1, 1}, {0, 2}}));
  Rng rng(17);
  Eigen::MatrixXd s = pi.service_matrix();
  for (int trial = 0; trial < 40; ++trial) {
    Eigen::VectorXd x = vec2(0.05 + rng.next_unit(), 0.05 + rng.next_unit());
    Eigen::VectorXd target = proj_boundary(x, pi);
    Eigen::VectorXd p = convex_decomposition(target, pi);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0));
    Eigen::VectorXd recon = s.transpose() * p;
    CHECK((recon - target).lpNorm<Eigen::Infinity>() < 1e-6);
    // Vertex solutions keep the support small.
    int support = 0;
    for (int i = 0; i < p.size(); ++i)
      if (p(i) > 1e-9) ++support;
    CHECK(support <= 3);
  }
}
