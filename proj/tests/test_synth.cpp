#include <doctest.h>

#include <algorithm>

#include "polyclf/error.hpp"
#include "polyclf/pipeline.hpp"
#include "polyclf/synth.hpp"

using namespace polyclf;

namespace {

// x+ = 0.5 x + u on X = [-2, 2], U = [-1, 1] with L = q x^2 + u^2 and the
// template epi(|x|) on [-a, a].
LinearSystem scalar_system() {
  return make_system(Mat::Constant(1, 1, 0.5), Mat::Ones(1, 1),
                     HPolyhedron::box(Vec::Constant(1, -2), Vec::Constant(1, 2)),
                     HPolyhedron::box(Vec::Constant(1, -1), Vec::Constant(1, 1)));
}

SynthesisSpec abs_spec(double q) {
  Mat F(4, 2);
  F << 1, 0, -1, 0, 1, -1, -1, -1;
  Vec z(4);
  z << 1, 1, 0, 0;
  SynthesisSpec s;
  s.triplet = build_triplet(F, z, TripletKind::Nominal);
  s.system = scalar_system();
  s.cost = StageCost::quadratic(Mat::Constant(1, 1, q), Mat::Ones(1, 1));
  Vec c = Vec::Zero(4);
  c.head(2).setConstant(-1.0);
  s.objective = LinearObjective{c};
  return s;
}

struct Nominal {
  Problem p = nominal_example();
  TemplateArtifact a;
  SynthesisSpec s;
  SynthesisResult r;
  Nominal() {
    a = build_template(p, TemplateConfig{});
    s = make_spec(p, a, SynthConfig{});
    r = synthesize(s);
  }
};

const Nominal& nominal() {
  static const Nominal n;
  return n;
}

}  // namespace

TEST_CASE("scalar epigraph of |x|: feasibility threshold") {
  // At the rim x = a the best input is u = -a/2 and the CLF row reads
  // a >= (q + 1/4) a^2, so a frozen rim a = 1 is feasible iff q <= 3/4.
  for (double q : {0.5, 0.7}) {
    auto s = abs_spec(q);
    s.freeze_z1 = Vec::Ones(2);
    CHECK(synthesize(s).status == SolveStatus::Optimal);
  }
  for (double q : {0.8, 1.2}) {
    auto s = abs_spec(q);
    s.freeze_z1 = Vec::Ones(2);
    CHECK(synthesize(s).status == SolveStatus::Infeasible);
  }
}

TEST_CASE("scalar epigraph of |x|: optimal rim") {
  // Maximizing the rims gives a = 1 / (q + 1/4) while that stays below 1.
  for (double q : {0.8, 1.0, 2.0}) {
    const auto r = synthesize(abs_spec(q));
    REQUIRE(r.optimal());
    const double a = 1.0 / (q + 0.25);
    CHECK(r.z(0) == doctest::Approx(a).epsilon(1e-6));
    CHECK(r.z(1) == doctest::Approx(a).epsilon(1e-6));
    CHECK(std::abs(r.z(2)) <= 1e-9);
    CHECK(std::abs(r.z(3)) <= 1e-9);
    const auto& t = abs_spec(q).triplet;
    for (int i = 0; i < t.num_vertices(); ++i)
      CHECK(r.v[i](0) == doctest::Approx(-0.5 * t.state(i, r.z)(0)).scale(1.0).epsilon(1e-5));
  }
}

TEST_CASE("frozen domain with no input or full contraction is infeasible") {
  const auto& n = nominal();
  SynthConfig sc;
  sc.freeze_z1 = true;
  sc.lambda = 0.0;
  CHECK(synthesize(make_spec(n.p, n.a, sc)).status == SolveStatus::Infeasible);

  Problem p0 = n.p;
  p0.sys.U = HPolyhedron::box(Vec::Zero(1), Vec::Zero(1));
  sc.lambda = 0.995;
  CHECK(synthesize(make_spec(p0, n.a, sc)).status == SolveStatus::Infeasible);
}

TEST_CASE("mode checks") {
  const auto& n = nominal();
  CHECK_THROWS_AS(synth_robust(n.s), Error);
  try {
    synth_robust(n.s);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModeMismatch);
  }
  auto bad = n.s;
  bad.triplet.kind = TripletKind::Domain;
  CHECK_THROWS_AS(synthesize(bad), Error);
  auto lam = n.s;
  lam.lambda = 1.5;
  CHECK_THROWS_AS(synthesize(lam), Error);
  auto obj = n.s;
  obj.objective = LinearObjective{Vec::Zero(3)};
  CHECK_THROWS_AS(synthesize(obj), Error);
}

TEST_CASE("nominal synthesis on the double integrator") {
  const auto& n = nominal();
  const auto& t = n.a.triplet;
  const auto& r = n.r;
  REQUIRE(r.optimal());
  for (const auto& [family, res] : r.residuals) {
    INFO(family);
    CHECK(res >= -1e-6);
  }

  // E z <= 0, V_1 z = 0, inputs and states admissible.
  CHECK((t.E * r.z).maxCoeff() <= 1e-7);
  CHECK(t.vertex(0, r.z).norm() <= 1e-8);
  const auto M = make_function(n.s, r);
  CHECK(M.eval(Vec::Zero(2)) == doctest::Approx(0.0).scale(1.0));
  for (int i = 0; i < t.num_vertices(); ++i) {
    const Vec x = t.state(i, r.z);
    CHECK(n.p.sys.U.max_violation(r.v[i]) <= 1e-8);
    CHECK(n.p.sys.X.max_violation(x) <= 1e-8);
    // Descent at the vertex, evaluated with the function itself.
    const Vec next = n.p.sys.A * x + n.p.sys.B * r.v[i];
    CHECK(M.eval(next) <= M.eval(x) - n.s.cost.eval(x, r.v[i]) + 1e-6);
    // Contraction of the domain rows.
    CHECK(M.in_domain(next / n.s.lambda, 1e-7));
  }

  // Hand count of the program size.
  const int f = t.num_facets(), v = t.num_vertices(), e = t.num_edge_rows();
  CHECK(r.size.counted_constraints == v * (1 + f + 4 + 2) + e + 2);
  CHECK(r.size.counted_variables == f + 2 * v);
}

TEST_CASE("linear objective enlarges the domain") {
  const auto& n = nominal();
  SynthConfig sc;
  sc.objective = ObjectiveKind::Linear;
  const auto r = synthesize(make_spec(n.p, n.a, sc));
  REQUIRE(r.optimal());
  CHECK(r.z.head(8).sum() >= n.r.z.head(8).sum() - 1e-6);
}

TEST_CASE("verification") {
  const auto& n = nominal();
  const auto rep = verify_clf(n.r, n.s, 500, 101, 3);
  CHECK(rep.samples == 500);
  CHECK(rep.violations == 0);
  CHECK(rep.min_residual >= -1e-6);
  const auto empty = verify_clf(n.r, n.s, 0, 101, 3);
  CHECK(empty.samples == 0);
  CHECK(empty.violations == 0);
  CHECK(empty.ok());

  // A function scaled down by half cannot satisfy the inequality.
  auto r2 = n.r;
  r2.z.tail(r2.z.size() - 8) *= 0.5;
  r2.z.head(8) = n.r.z.head(8);
  const auto bad = verify_clf(r2, n.s, 300, 101, 3);
  CHECK(bad.violations > 0);
}

TEST_CASE("robust synthesis with an anchored template") {
  const Problem p = robust_example();
  TemplateConfig tc;
  tc.strategy = Strategy::Anchored;
  tc.f2 = 83;
  tc.N = 7;
  const auto a = build_template(p, tc);
  const auto s = make_spec(p, a, SynthConfig{});
  const auto r = synthesize(s);
  REQUIRE(r.optimal());
  const auto& t = a.triplet;
  const int f = t.num_facets();
  CHECK(r.z(f - 1) == 0.0);
  CHECK((t.E * r.z).maxCoeff() <= 1e-7);
  // Vertices on the flat facet carry no stage cost and no slack.
  int flat = 0;
  for (int i = 0; i < t.num_vertices(); ++i) {
    const auto& J = t.active[i];
    if (std::find(J.begin(), J.end(), f - 1) == J.end()) continue;
    ++flat;
    CHECK(r.y(i) == 0.0);
    CHECK(s.cost.eval(t.state(i, r.z), r.v[i]) <= 1e-8);
  }
  CHECK(flat >= 3);
  // The zero set of M is X_s.
  const auto M = make_function(s, r);
  for (const auto& vx : enumerate_vertices(s.cost.target)) CHECK(M.eval(vx.point) <= 1e-8);
  const auto rep = verify_clf(r, s, 300, 101, 5);
  CHECK(rep.violations == 0);
  CHECK(r.size.counted_constraints == t.num_vertices() * (1 + f + 4 + 2) + t.num_edge_rows() + f);
}
