#include <doctest.h>

#include <random>

#include "polyclf/bounds.hpp"
#include "polyclf/error.hpp"

using namespace polyclf;

namespace {

LinearSystem double_integrator() {
  Mat A(2, 2), B(2, 1);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  return make_system(A, B, HPolyhedron::box(Vec::Constant(2, -1), Vec::Constant(2, 2)),
                     HPolyhedron::box(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5)));
}

StageCost double_integrator_cost() {
  Mat Q(2, 2);
  Q << 1, 0, 0, 0.1;
  return StageCost::quadratic(Q, Mat::Constant(1, 1, 0.1));
}

Mat mixed_facets() {
  // Four domain rows and three lower facets.
  Mat F(7, 3);
  F << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0,  //
      0.3, 0.2, -1, -0.4, 0.1, -1, 0, 0, -1;
  return F;
}

}  // namespace

TEST_CASE("Riccati fixed point") {
  Mat I = Mat::Identity(2, 2);
  const auto trivial = make_system(Mat::Zero(2, 2), I, HPolyhedron::box(-Vec::Ones(2), Vec::Ones(2)),
                                   HPolyhedron::box(-Vec::Ones(2), Vec::Ones(2)));
  const auto P0 = lqr_underestimator(trivial, StageCost::quadratic(I, I));
  CHECK((P0.P - I).norm() < 1e-14);

  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  const auto P = lqr_underestimator(sys, cost);
  CHECK((P.P - riccati_step(P.P, sys.A, sys.B, cost.Q, cost.R)).cwiseAbs().maxCoeff() <= 1e-10);
  // The closed loop of the LQR gain is Schur.
  const Mat K = lqr_gain(P, sys, cost);
  const Eigen::EigenSolver<Mat> es(sys.A + sys.B * K);
  CHECK(es.eigenvalues().cwiseAbs().maxCoeff() < 1.0);

  LinearSystem bad = trivial;
  bad.A = 2 * I;
  bad.B = Mat::Zero(2, 2);
  CHECK_THROWS_AS(lqr_underestimator(bad, StageCost::quadratic(I, I)), Error);
}

TEST_CASE("zeta at horizon zero") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  Mat F(2, 3);
  F << 1, 0, 0, 0, 0, -1;
  const Vec z = zeta_nominal(F, sys, cost, nullptr, 0);
  CHECK(z(0) == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(z(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));

  Mat bad(1, 3);
  bad << 1, 0, 0.5;
  CHECK_THROWS_AS(zeta_nominal(bad, sys, cost, nullptr, 0), Error);
}

TEST_CASE("zeta is nonincreasing in the horizon") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  const auto P = lqr_underestimator(sys, cost);
  const Mat F = mixed_facets();
  Vec prev;
  for (int N = 0; N <= 5; ++N) {
    const Vec z = zeta_nominal(F, sys, cost, &P, N);
    if (N > 0) CHECK((z - prev).maxCoeff() <= 1e-8);
    prev = z;
  }
}

TEST_CASE("serial and parallel zeta agree") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  ZetaOptions ser;
  ser.parallel = false;
  const Vec a = zeta_nominal(mixed_facets(), sys, cost, nullptr, 3, ser);
  const Vec b = zeta_nominal(mixed_facets(), sys, cost, nullptr, 3);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("min-max zeta with degenerate uncertainty matches nominal") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  const auto P = lqr_underestimator(sys, cost);
  const auto unc = no_uncertainty(sys.A, sys.B);
  CHECK(distinct_w_vertices(unc).size() == 1);
  for (int N : {0, 2, 4}) {
    const Vec a = zeta_nominal(mixed_facets(), sys, cost, &P, N);
    const Vec b = zeta_minmax(mixed_facets(), sys, unc, cost, &P, N);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("min-max zeta on a scalar system with two disturbances") {
  // x+ = x + u + w, w in {-1/2, 1/2}, L = x^2 + u^2, terminal x^2.
  const Mat one = Mat::Ones(1, 1);
  const auto sys = make_system(one, one, HPolyhedron::box(Vec::Constant(1, -2), Vec::Constant(1, 2)),
                               HPolyhedron::box(Vec::Constant(1, -1), Vec::Constant(1, 1)));
  UncertaintyModel unc;
  unc.AB.emplace_back(one, one);
  unc.W = HPolyhedron::box(Vec::Constant(1, -0.5), Vec::Constant(1, 0.5));
  const auto cost = StageCost::quadratic(one, one);
  const QuadForm Mbar{one};
  Mat F(2, 2);
  F << 0, -1, 1, -1;
  const Vec z = zeta_minmax(F, sys, unc, cost, &Mbar, 1);

  // Both scenarios share u0; the worse of them is (|x0 + u0| + 1/2)^2.
  auto value = [](double g, double x0, double u0) {
    const double a = std::abs(x0 + u0) + 0.5;
    if (a > 2.0) return -kInf;
    return g * x0 - x0 * x0 - u0 * u0 - a * a;
  };
  for (int row = 0; row < 2; ++row) {
    const double g = F(row, 0);
    double best = -kInf, bx = 0, bu = 0;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 200; ++j) {
        const double x0 = -2 + i * 0.01, u0 = -1 + j * 0.01;
        const double v = value(g, x0, u0);
        if (v > best) best = v, bx = x0, bu = u0;
      }
    for (double step = 0.005; step > 1e-9; step *= 0.5)
      for (int k = 0; k < 40; ++k)
        for (int dx = -1; dx <= 1; ++dx)
          for (int du = -1; du <= 1; ++du) {
            const double v = value(g, bx + dx * step, bu + du * step);
            if (v > best) best = v, bx += dx * step, bu += du * step;
          }
    CHECK(z(row) == doctest::Approx(best).epsilon(1e-6));
  }
  CHECK(z(0) == doctest::Approx(-0.25).epsilon(1e-7));
}

TEST_CASE("scenario tree size cap") {
  const auto sys = double_integrator();
  const auto unc = segment_uncertainty(sys.A, sys.B, Vec::Ones(2), 1.0 / 40);
  CHECK(scenario_tree_nodes(2, 3) == 15);
  CHECK_THROWS_AS(zeta_minmax(mixed_facets(), sys, unc, double_integrator_cost(), nullptr, 5), Error);
  ZetaOptions opt;
  opt.max_horizon = 20;
  opt.max_nodes = 1000;
  try {
    zeta_minmax(mixed_facets(), sys, unc, double_integrator_cost(), nullptr, 12, opt);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TreeTooLarge);
  }
}

TEST_CASE("finite-horizon values") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  const auto P = lqr_underestimator(sys, cost);
  Vec x(2);
  x << 0.4, -0.2;
  CHECK(ocp_value(sys, cost, &P, 0, x) == doctest::Approx(P.eval(x)).epsilon(1e-7));
  CHECK(ocp_value(sys, cost, &P, 3, Vec::Zero(2)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-7));
  // Unconstrained near the origin, so J_N equals the LQR value.
  CHECK(ocp_value(sys, cost, &P, 5, 0.05 * x) == doctest::Approx(P.eval(0.05 * x)).epsilon(1e-6));
  // Far corner: no input keeps x in X.
  Vec far(2);
  far << 2, 2;
  CHECK(ocp_value(sys, cost, &P, 3, far) == kInf);
}

TEST_CASE("grid value iteration") {
  const auto sys = double_integrator();
  const auto cost = double_integrator_cost();
  const auto dom = HPolyhedron::box(Vec::Constant(2, -1), Vec::Constant(2, 1));
  ValueIterationOptions opt;
  opt.grid_res = 41;
  opt.u_res = 41;

  SUBCASE("zero stage cost") {
    const auto zero = StageCost::quadratic(Mat::Zero(2, 2), Mat::Zero(1, 1));
    const auto g = value_iteration(sys, zero, dom, nullptr, opt);
    CHECK(g.converged);
    CHECK(g.max_value() == 0.0);
  }
  SUBCASE("monotone from below and underestimated by LQR") {
    const auto g = value_iteration(sys, cost, dom, nullptr, opt);
    CHECK(g.converged);
    CHECK(g.monotone_violation <= 1e-12);
    CHECK(g.eval(Vec::Zero(2)) == doctest::Approx(0.0).scale(1.0));
    const auto P = lqr_underestimator(sys, cost);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-0.9, 0.9);
    for (int k = 0; k < 100; ++k) {
      const Vec x = Vec::NullaryExpr(2, [&]() { return U(rng); });
      const double ref = g.eval(x);
      if (!std::isfinite(ref)) continue;
      CHECK(P.eval(x) <= ref + 2 * g.cell_variation(x) + 1e-9);
    }
  }
  SUBCASE("serial and parallel sweeps agree") {
    opt.parallel = false;
    const auto a = value_iteration(sys, cost, dom, nullptr, opt);
    opt.parallel = true;
    const auto b = value_iteration(sys, cost, dom, nullptr, opt);
    CHECK(a.iterations == b.iterations);
    CHECK((a.values.array() == b.values.array()).all());
  }
  SUBCASE("robust reference vanishes on the target") {
    Mat K(1, 2);
    K << -0.895, -1.367;
    const auto unc = segment_uncertainty(sys.A, sys.B, Vec::Ones(2), 1.0 / 40);
    const auto oct = build_triplet(polygon_directions(8), Vec::Ones(8), TripletKind::Domain);
    const auto rci = compute_rci_target(oct, K, sys, unc);
    const auto L = StageCost::set_distance(cost.Q, cost.R, K, rci.set);
    opt.grid_res = 81;
    opt.u_res = 101;
    opt.zero_set = &rci.set;
    const auto g = value_iteration(sys, L, dom, &unc, opt);
    CHECK(g.monotone_violation <= 1e-12);
    CHECK(g.converged);
    CHECK(g.max_value() > 0.1);
    int interior = 0;
    for (int a = 0; a < g.axis0.size(); ++a)
      for (int b = 0; b < g.axis1.size(); ++b) {
        Vec x(2);
        x << g.axis0(a), g.axis1(b);
        if (rci.set.max_violation(x) > -0.01) continue;
        ++interior;
        CHECK(g.values(a, b) <= 1e-3);
        // Off-node points inside the target as well.
        const Vec y = x + Vec::Constant(2, 0.004);
        if (rci.set.max_violation(y) < -0.03) CHECK(g.eval(y) <= 1e-3);
      }
    CHECK(interior > 0);
  }
}
