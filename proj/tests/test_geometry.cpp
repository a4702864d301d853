#include <doctest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "polyclf/error.hpp"
#include "polyclf/geometry.hpp"

using namespace polyclf;

namespace {

HPolyhedron unit_square() {
  Mat F(4, 2);
  F << 1, 0, -1, 0, 0, 1, 0, -1;
  return HPolyhedron(F, Vec::Ones(4));
}

HPolyhedron abs_epigraph() {
  // G1 = (+-1), z1 = 1; lower rows (1,-1), (-1,-1), z2 = 0.
  Mat F(4, 2);
  F << 1, 0, -1, 0, 1, -1, -1, -1;
  Vec z(4);
  z << 1, 1, 0, 0;
  return HPolyhedron(F, z);
}

bool has_point(const std::vector<VertexInfo>& vs, double a, double b) {
  for (const auto& v : vs)
    if (std::abs(v.point(0) - a) < 1e-9 && std::abs(v.point(1) - b) < 1e-9) return true;
  return false;
}

}  // namespace

TEST_CASE("simplex LP on small problems") {
  const auto sq = unit_square();
  Vec c(2);
  c << 1, 2;
  auto r = maximize_over(sq.F(), sq.z(), c);
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.value == doctest::Approx(3.0));
  CHECK(r.x(0) == doctest::Approx(1.0));
  CHECK(r.x(1) == doctest::Approx(1.0));

  // Unbounded half-plane.
  Mat F(1, 2);
  F << 1, 0;
  r = maximize_over(F, Vec::Ones(1), Vec::Unit(2, 1));
  CHECK(r.status == LpStatus::Unbounded);

  // Empty set.
  Mat F2(2, 1);
  F2 << 1, -1;
  Vec z2(2);
  z2 << -1, -1;
  r = maximize_over(F2, z2, Vec::Ones(1));
  CHECK(r.status == LpStatus::Infeasible);
  CHECK(HPolyhedron(F2, z2).is_empty());
}

TEST_CASE("vertex enumeration: worked examples") {
  SUBCASE("unit square") {
    const auto vs = enumerate_vertices(unit_square());
    REQUIRE(vs.size() == 4);
    for (const auto& v : vs) CHECK(v.active_set.size() == 2);
    CHECK(has_point(vs, 1, 1));
    CHECK(has_point(vs, -1, -1));
    // lexicographic order
    CHECK(vs.front().point(0) == doctest::Approx(-1.0));
    CHECK(vs.front().point(1) == doctest::Approx(-1.0));
  }
  SUBCASE("triangle") {
    Mat F(3, 2);
    F << 1, 0, 0, 1, -1, -1;
    const HPolyhedron P(F, Vec::Ones(3));
    const auto vs = enumerate_vertices(P);
    REQUIRE(vs.size() == 3);
    CHECK(has_point(vs, 1, 1));
    CHECK(has_point(vs, 1, -2));
    CHECK(has_point(vs, -2, 1));
    Vec d(2);
    d << 1, 1;
    CHECK(support(P, d) == doctest::Approx(2.0));
  }
  SUBCASE("epigraph of |x| with cap") {
    const auto vs = enumerate_vertices(abs_epigraph(), 10.0);
    REQUIRE(vs.size() == 3);
    CHECK(has_point(vs, 0, 0));
    CHECK(has_point(vs, 1, 1));
    CHECK(has_point(vs, -1, 1));
    CHECK_THROWS_AS(enumerate_vertices(abs_epigraph()), Error);
    const auto va = enumerate_vertices_auto(abs_epigraph());
    CHECK(va.size() == 3);
  }
  SUBCASE("not pointed") {
    Mat F(2, 2);
    F << 1, 0, -1, 0;
    CHECK_THROWS_AS(enumerate_vertices(HPolyhedron(F, Vec::Ones(2)), 5.0), Error);
  }
}

TEST_CASE("simplicity and perturbation") {
  CHECK(is_simple(unit_square()));
  Mat F(5, 2);
  F << 1, 0, -1, 0, 0, 1, 0, -1, 1, 1;
  Vec z = Vec::Ones(5);
  z(4) = 2.0;
  const HPolyhedron degenerate(F, z);
  CHECK_FALSE(is_simple(degenerate));
  const Vec zp = perturb_to_simple(F, z, 1e-3, 7);
  CHECK((zp - z).lpNorm<Eigen::Infinity>() <= 1e-3);
  CHECK(is_simple(HPolyhedron(F, zp)));
  // Fast path returns the input untouched.
  const auto sq = unit_square();
  CHECK((perturb_to_simple(sq.F(), sq.z(), 1e-3, 1) - sq.z()).norm() == 0.0);
  // 3-D simplex.
  Mat S(4, 3);
  S << -1, 0, 0, 0, -1, 0, 0, 0, -1, 1, 1, 1;
  CHECK(is_simple(HPolyhedron(S, Vec::Unit(4, 3))));
  // Empty polyhedron.
  Mat E(2, 1);
  E << 1, -1;
  Vec ze(2);
  ze << -1, -1;
  CHECK_THROWS_AS(perturb_to_simple(E, ze, 1e-3, 1), Error);
}

TEST_CASE("support of the state box") {
  const HPolyhedron X = HPolyhedron::box(Vec::Constant(2, -1.0), Vec::Constant(2, 2.0));
  CHECK(support(X, Vec::Unit(2, 0)) == doctest::Approx(2.0));
  CHECK(support(X, -Vec::Unit(2, 1)) == doctest::Approx(1.0));
}

TEST_CASE("enumeration matches the active-set oracle on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(2, 4);
  std::normal_distribution<double> g;
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const int n = dim(rng);
    const int m = std::uniform_int_distribution<int>(n + 1, 14)(rng);
    Mat F(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) F(i, j) = g(rng);
    Vec z(m);
    for (int i = 0; i < m; ++i) z(i) = 0.5 + std::abs(g(rng));
    const HPolyhedron P(F, z);
    std::vector<VertexInfo> got;
    try {
      got = enumerate_vertices(P);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotPointed);
      continue;
    }
    const auto want = oracle::brute_force_vertices(P.F(), P.z());
    REQUIRE(got.size() == want.size());
    for (size_t k = 0; k < got.size(); ++k) {
      CHECK((got[k].point - want[k].first).norm() < 1e-9);
      CHECK(got[k].active_set == want[k].second);
    }
    // Pivoting agrees with brute force.
    const auto piv = enumerate_vertices(P, std::nullopt, VertexMethod::Pivot);
    REQUIRE(piv.size() == want.size());
    for (size_t k = 0; k < piv.size(); ++k) CHECK(piv[k].active_set == want[k].second);
    // Support equals the vertex maximum.
    const Vec d = Vec::NullaryExpr(n, [&]() { return g(rng); });
    double best = -kInf;
    for (const auto& v : want) best = std::max(best, d.dot(v.first));
    CHECK(support(P, d) == doctest::Approx(best).epsilon(1e-8));
    ++checked;
  }
  CHECK(checked > 50);
}

TEST_CASE("degenerate vertices are found by pivoting") {
  // Square pyramid apex has four active facets.
  Mat F(5, 3);
  F << 1, 0, 1, -1, 0, 1, 0, 1, 1, 0, -1, 1, 0, 0, -1;
  Vec z(5);
  z << 1, 1, 1, 1, 0;
  const HPolyhedron P(F, z);
  const auto piv = enumerate_vertices(P, std::nullopt, VertexMethod::Pivot);
  const auto bf = enumerate_vertices(P, std::nullopt, VertexMethod::BruteForce);
  REQUIRE(piv.size() == 5);
  REQUIRE(bf.size() == 5);
  for (size_t k = 0; k < 5; ++k) CHECK(piv[k].active_set == bf[k].active_set);
  CHECK_FALSE(is_simple(P));
}

TEST_CASE("weighted projection") {
  const auto sq = unit_square();
  Vec x(2);
  x << 3, 0.5;
  Vec p = project(sq, x, Mat::Identity(2, 2));
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(0.5));
  x << 3, 3;
  p = project(sq, x, Mat::Identity(2, 2));
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(1.0));
  // Anisotropic metric against a dense brute-force minimization.
  Mat Q(2, 2);
  Q << 1, 0, 0, 0.1;
  Mat F(3, 2);
  F << 1, 0, 0, 1, -1, -1;
  const HPolyhedron T(F, Vec::Ones(3));
  x << 2.0, 3.0;
  p = project(T, x, Q);
  double best = kInf;
  for (int i = 0; i <= 600; ++i)
    for (int j = 0; j <= 600; ++j) {
      Vec q(2);
      q << -2.0 + 3.0 * i / 600, -2.0 + 3.0 * j / 600;
      if (!T.contains(q, 1e-12)) continue;
      best = std::min(best, (q - x).dot(Q * (q - x)));
    }
  CHECK((p - x).dot(Q * (p - x)) <= best + 1e-12);
  CHECK((p - x).dot(Q * (p - x)) >= best - 0.02);
}
