#include <doctest.h>

#include <sstream>

#include "polyclf/error.hpp"
#include "polyclf/pipeline.hpp"
#include "polyclf/sim.hpp"

using namespace polyclf;

namespace {

struct Closed {
  Problem p;
  SynthesisSpec s;
  SynthesisResult r;
  ExplicitController c;
};

Closed closed_loop(const Problem& p, const TemplateConfig& tc) {
  const auto a = build_template(p, tc);
  const auto s = make_spec(p, a, SynthConfig{});
  const auto r = synthesize(s);
  REQUIRE(r.optimal());
  return {p, s, r, make_controller(s, r)};
}

const Closed& nominal() {
  static const Closed n = closed_loop(nominal_example(), TemplateConfig{});
  return n;
}

// M = |x| on [-1, 1] driven by x+ = x + u with every vertex control +1.
ExplicitController pushing_controller(LinearSystem& sys) {
  Mat F(4, 2);
  F << 1, 0, -1, 0, 1, -1, -1, -1;
  Vec z(4);
  z << 1, 1, 0, 0;
  sys = make_system(Mat::Ones(1, 1), Mat::Ones(1, 1),
                    HPolyhedron::box(Vec::Constant(1, -3), Vec::Constant(1, 3)),
                    HPolyhedron::box(Vec::Constant(1, -1), Vec::Constant(1, 1)));
  const PwaFunction M(build_triplet(F, z, TripletKind::Nominal), z);
  return ExplicitController(M, std::vector<Vec>(3, Vec::Ones(1)));
}

}  // namespace

TEST_CASE("origin is an equilibrium") {
  const auto& n = nominal();
  const auto t = simulate(n.p.sys, n.c, n.s.cost, Vec::Zero(2), 20);
  REQUIRE(t.states.size() == 21);
  // Exact up to the solver accuracy of the apex controls.
  for (const auto& x : t.states) CHECK(x.norm() <= 1e-8);
  for (double m : t.M_values) CHECK(std::abs(m) <= 1e-8);
  CHECK(t.descent_violations.empty());
}

TEST_CASE("nominal runs from the domain vertices") {
  const auto& n = nominal();
  std::vector<Vec> x0s;
  for (const auto& v : enumerate_vertices(n.c.function().domain())) x0s.push_back(v.point);
  const auto runs = simulate_batch(n.p.sys, n.c, n.s.cost, x0s, 50);
  REQUIRE(runs.size() == x0s.size());
  for (const auto& t : runs) {
    CHECK_FALSE(t.breach);
    CHECK(t.steps() == 50);
    CHECK(t.descent_violations.empty());
    for (size_t k = 0; k + 1 < t.states.size(); ++k)
      CHECK(t.M_values[k + 1] <= t.M_values[k] - t.stage_costs[k] + 1e-6);
    CHECK(t.M_values.back() <= 1e-4 * t.M_values.front());
  }
  // Serial runs agree with the batch.
  const auto t0 = simulate(n.p.sys, n.c, n.s.cost, x0s[0], 50);
  CHECK((t0.states.back() - runs[0].states.back()).norm() == 0.0);
}

TEST_CASE("start outside the domain") {
  const auto& n = nominal();
  try {
    simulate(n.p.sys, n.c, n.s.cost, Vec::Constant(2, 5.0), 5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StartOutOfDomain);
  }
  CHECK_THROWS_AS(simulate(n.p.sys, n.c, n.s.cost, Vec::Zero(2), 5, VertexCycle{}), Error);
}

TEST_CASE("breach stops the run") {
  LinearSystem sys;
  const auto c = pushing_controller(sys);
  const auto cost = StageCost::quadratic(Mat::Ones(1, 1), Mat::Ones(1, 1));
  const auto t = simulate(sys, c, cost, Vec::Constant(1, 0.5), 10);
  REQUIRE(t.breach);
  CHECK(t.breach->step == 0);
  CHECK(t.breach->x(0) == doctest::Approx(1.5));
  CHECK(t.states.size() == 1);
  CHECK(t.inputs.size() == 1);
}

TEST_CASE("disturbance policies") {
  LinearSystem sys;
  auto c = pushing_controller(sys);
  // Replace the controls by the deadbeat law u = -x.
  std::vector<Vec> v;
  for (const auto& x : c.function().vertex_points()) v.push_back(-x);
  c = ExplicitController(c.function(), v);
  const auto cost = StageCost::quadratic(Mat::Ones(1, 1), Mat::Ones(1, 1));
  const UncertaintyModel unc{{{sys.A, sys.B}}, HPolyhedron::box(Vec::Constant(1, -0.1), Vec::Constant(1, 0.1))};

  const auto ec = simulate(sys, c, cost, Vec::Constant(1, 0.5), 4, ExtremeConstant{Vec::Constant(1, 0.1)});
  for (size_t k = 1; k < ec.states.size(); ++k) CHECK(ec.states[k](0) == doctest::Approx(0.1));

  const auto vc = simulate(sys, c, cost, Vec::Constant(1, 0.5), 4, VertexCycle{}, &unc);
  REQUIRE(vc.disturbances.size() == 4);
  CHECK(vc.disturbances[0](0) == doctest::Approx(-vc.disturbances[1](0)));
  CHECK(std::abs(vc.disturbances[0](0)) == doctest::Approx(0.1));

  // Greedy picks the vertex with the larger |x+|; both give 0.1 here, and
  // from x = 0.5 with u = -0.5 the successor magnitude is 0.1 either way.
  const auto gr = simulate(sys, c, cost, Vec::Constant(1, 0.5), 3, WorstCaseGreedy{}, &unc);
  for (size_t k = 1; k < gr.states.size(); ++k) CHECK(std::abs(gr.states[k](0)) == doctest::Approx(0.1));
}

TEST_CASE("trajectory CSV") {
  const auto& n = nominal();
  const auto t = simulate(n.p.sys, n.c, n.s.cost, Vec::Constant(2, 0.3), 3);
  std::istringstream is(trajectory_csv(t));
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,x1,x2,u1,M,L,descent_residual");
  int rows = 0;
  std::string last;
  while (std::getline(is, line)) ++rows, last = line;
  CHECK(rows == 4);
  CHECK(last.substr(last.size() - 2) == ",,");

  LinearSystem sys;
  const auto c = pushing_controller(sys);
  const auto td = simulate(sys, c, StageCost::quadratic(Mat::Ones(1, 1), Mat::Ones(1, 1)),
                           Vec::Zero(1), 1, ExtremeConstant{Vec::Constant(1, 0.0)});
  std::istringstream is2(trajectory_csv(td));
  std::getline(is2, line);
  CHECK(line == "step,x1,u1,w1,M,L,descent_residual");
}
