#include <doctest.h>

#include <cmath>

#include "alchemy/logistic.hpp"
#include "alchemy/rng.hpp"

using namespace alchemy;

namespace {

// logit P(y=1) = 1.0 x1 - 0.5 x2, x ~ N(0, 1)
Design planted(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Design d;
  d.names = {"intercept", "x1", "x2"};
  d.x.resize(static_cast<Eigen::Index>(n), 3);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
    const double x1 = rng.normal(), x2 = rng.normal();
    d.x(i, 0) = 1.0;
    d.x(i, 1) = x1;
    d.x(i, 2) = x2;
    const double p = 1.0 / (1.0 + std::exp(-(1.0 * x1 - 0.5 * x2)));
    d.y[i] = rng.uniform01() < p ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

TEST_SUITE("logistic") {

TEST_CASE("planted coefficients are recovered at n = 10,000") {
  const auto r = fit_logistic(planted(10000, 0));
  CHECK(r.converged);
  CHECK(r.n == 10000);
  CHECK(std::abs(r.coef("x1") - 1.0) < 0.1);
  CHECK(std::abs(r.coef("x2") + 0.5) < 0.1);
  CHECK(std::abs(r.coef("intercept")) < 0.1);
  for (const auto& t : r.terms) {
    CHECK(t.se > 0.0);
    CHECK(t.z == t.estimate / t.se);
  }
  CHECK_THROWS_AS(r.at("x3"), std::out_of_range);
}

TEST_CASE("flipping labels negates every coefficient exactly") {
  auto d = planted(2000, 7);
  const auto r = fit_logistic(d);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] = 1.0 - d.y[i];
  const auto f = fit_logistic(d);
  REQUIRE(r.terms.size() == f.terms.size());
  for (std::size_t k = 0; k < r.terms.size(); ++k) {
    CHECK(f.terms[k].estimate == -r.terms[k].estimate);
    CHECK(f.terms[k].se == r.terms[k].se);
  }
}

TEST_CASE("standard errors agree with the inverse information") {
  // Two-group design has a closed form: se of the group effect is
  // sqrt(1/(n1 p1 q1) + 1/(n0 p0 q0)).
  Design d;
  d.names = {"intercept", "g"};
  const int n0 = 400, n1 = 300, pos0 = 100, pos1 = 200;
  d.x.resize(n0 + n1, 2);
  d.y.resize(n0 + n1);
  for (int i = 0; i < n0 + n1; ++i) {
    const bool g = i >= n0;
    d.x(i, 0) = 1.0;
    d.x(i, 1) = g ? 1.0 : 0.0;
    d.y[i] = g ? (i - n0 < pos1) : (i < pos0);
  }
  const auto r = fit_logistic(d);
  const double p0 = double(pos0) / n0, p1 = double(pos1) / n1;
  CHECK(r.coef("g") == doctest::Approx(std::log(p1 / (1 - p1)) - std::log(p0 / (1 - p0))).epsilon(1e-10));
  CHECK(r.at("g").se ==
        doctest::Approx(std::sqrt(1.0 / (n1 * p1 * (1 - p1)) + 1.0 / (n0 * p0 * (1 - p0)))).epsilon(1e-8));
}

TEST_CASE("degenerate designs are reported") {
  auto d = planted(200, 1);
  Design one_class = d;
  one_class.y.setZero();
  CHECK_THROWS_AS(fit_logistic(one_class), DegenerateSample);

  Design collinear = d;
  collinear.x.col(2) = 2.0 * collinear.x.col(1);
  CHECK_THROWS_AS(fit_logistic(collinear), SingularDesign);

  Design names = d;
  names.names.pop_back();
  CHECK_THROWS_AS(fit_logistic(names), SingularDesign);

  Design sep = d;
  for (Eigen::Index i = 0; i < sep.y.size(); ++i) sep.y[i] = sep.x(i, 1) > 0 ? 1.0 : 0.0;
  try {
    fit_logistic(sep);
    FAIL("expected SeparationDetected");
  } catch (const SeparationDetected& e) {
    CHECK_FALSE(e.partial().converged);
    CHECK(e.partial().coef("x1") > 5.0);
  }
}

}  // TEST_SUITE
