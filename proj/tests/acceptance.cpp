// Acceptance suite: one PASS/FAIL line per criterion.  Run with criterion
// numbers as arguments to select a subset (dependencies are computed as
// needed).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "polyclf/error.hpp"
#include "polyclf/pipeline.hpp"
#include "polyclf/sim.hpp"

using namespace polyclf;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------------------
// Shared pipelines.

struct Synthesized {
  Problem p;
  TemplateArtifact a;
  SynthesisSpec s;
  SynthesisResult r;
  std::unique_ptr<PwaFunction> M;
  std::unique_ptr<ExplicitController> c;
  Vec zeta;  // outer bound used for the sandwich check
  double seconds = 0.0;
};

void finish(Synthesized& out) {
  out.s = make_spec(out.p, out.a, SynthConfig{});
  out.r = synthesize(out.s);
  if (out.r.optimal()) {
    out.M = std::make_unique<PwaFunction>(make_function(out.s, out.r));
    out.c = std::make_unique<ExplicitController>(make_controller(out.s, out.r));
  }
}

Synthesized& nominal_s3() {
  static std::unique_ptr<Synthesized> n;
  if (!n) {
    const double t0 = now();
    n = std::make_unique<Synthesized>();
    n->p = nominal_example();
    TemplateConfig tc;  // S3, f1 = 8, 15 interior samples and one edge midpoint, N = 5
    n->a = build_template(n->p, tc);
    n->zeta = n->a.zeta;
    finish(*n);
    n->seconds = now() - t0;
  }
  return *n;
}

Synthesized& nominal_refined() {
  static std::unique_ptr<Synthesized> n;
  if (!n) {
    const double t0 = now();
    n = std::make_unique<Synthesized>();
    n->p = nominal_example();
    TemplateConfig tc;
    tc.strategy = Strategy::S2;
    tc.f2 = 461;
    tc.seed = 3;
    n->a = build_template(n->p, tc);
    n->zeta = n->a.zeta;
    finish(*n);
    n->seconds = now() - t0;
  }
  return *n;
}

Synthesized& robust_anchored() {
  static std::unique_ptr<Synthesized> n;
  if (!n) {
    const double t0 = now();
    n = std::make_unique<Synthesized>();
    n->p = robust_example();
    TemplateConfig tc;
    tc.strategy = Strategy::Anchored;
    tc.f2 = 83;
    tc.N = 7;
    n->a = build_template(n->p, tc);
    finish(*n);
    // The anchors are not outer bounds; the sandwich uses the plain min-max
    // bound on the same rows.
    ZetaOptions zo;
    zo.max_horizon = 7;
    n->zeta = zeta_minmax(n->a.triplet.F, n->p.sys, *n->p.uncertainty, n->s.cost, nullptr, 7, zo);
    n->seconds = now() - t0;
  }
  return *n;
}

const GridFunction& nominal_reference() {
  static std::unique_ptr<GridFunction> g;
  if (!g) {
    const auto p = nominal_example();
    g = std::make_unique<GridFunction>(
        value_iteration(p.sys, StageCost::quadratic(p.Q, p.R), p.sys.X, nullptr, ValueIterationOptions{}));
  }
  return *g;
}

const GridFunction& robust_reference() {
  static std::unique_ptr<GridFunction> g;
  if (!g) {
    auto& r = robust_anchored();
    ValueIterationOptions o;
    o.zero_set = &r.s.cost.target;
    g = std::make_unique<GridFunction>(value_iteration(r.p.sys, r.s.cost, r.p.sys.X, &*r.p.uncertainty, o));
  }
  return *g;
}

// ---------------------------------------------------------------------------
// Shared checks.

// Lower bound with epigraph P(zeta): max over the lower rows.
double outer_bound(const Mat& F, const Vec& zeta, int f1, const Vec& x) {
  const int nx = static_cast<int>(x.size());
  double m = -kInf;
  for (int j = f1; j < F.rows(); ++j) m = std::max(m, (zeta(j) - F.row(j).head(nx).dot(x)) / F(j, nx));
  return m;
}

void property_suite(const Synthesized& n, Outcome& o, const std::string& tag, std::uint64_t seed) {
  const auto& M = *n.M;
  const auto& t = M.triplet();
  const auto xs = sample_domain(M, 2000, seed);
  double conv = 0.0;
  for (size_t k = 0; k + 1 < xs.size(); k += 2) {
    const double a = M.eval(xs[k]), b = M.eval(xs[k + 1]);
    conv = std::max(conv, M.eval(0.5 * (xs[k] + xs[k + 1])) - 0.5 * (a + b));
  }
  o.require(conv <= 1e-8, tag + ": midpoint convexity gap " + fmt("%.2e", conv));

  // Adjacent regions agree on their shared vertices.
  double cont = 0.0;
  for (const auto& r1 : M.regions())
    for (const auto& r2 : M.regions()) {
      if (r1.facet >= r2.facet) continue;
      for (int i : r1.vertices)
        if (std::binary_search(r2.vertices.begin(), r2.vertices.end(), i)) {
          const Vec& x = M.vertex_points()[i];
          cont = std::max(cont, std::abs(M.piece(r1.facet, x) - M.piece(r2.facet, x)));
        }
    }
  o.require(cont <= 1e-9, tag + ": cross-region jump " + fmt("%.2e", cont));

  double epi = 0.0;
  for (const auto& x : xs) {
    Vec p(x.size() + 1);
    p << x, M.eval(x);
    epi = std::max(epi, (t.F * p - M.z()).maxCoeff());
  }
  o.require(epi <= 1e-8, tag + ": epigraph violation " + fmt("%.2e", epi));
}

void sandwich(const Synthesized& n, const GridFunction& ref, Outcome& o, const std::string& tag) {
  const auto& M = *n.M;
  const auto& t = M.triplet();
  double worst = -kInf;
  for (const auto& x : M.vertex_points())
    worst = std::max(worst, outer_bound(t.F, n.zeta, t.f1, x) - M.eval(x));
  o.require(worst <= 1e-6, tag + ": M_zeta - M at vertices " + fmt("%.2e", worst));

  int nodes = 0, low = 0, high = 0;
  for (int a = 0; a < ref.values.rows(); ++a)
    for (int b = 0; b < ref.values.cols(); ++b) {
      if (!ref.mask(a, b) || !std::isfinite(ref.values(a, b))) continue;
      Vec x(2);
      x << ref.axis0(a), ref.axis1(b);
      if (!M.in_domain(x, 0.0)) continue;
      ++nodes;
      const double slack = 2.0 * ref.cell_variation(x);
      const double r = ref.values(a, b);
      if (r < outer_bound(t.F, n.zeta, t.f1, x) - slack - 1e-9) ++low;
      if (r > M.eval(x) + slack + 1e-9) ++high;
    }
  o.require(low == 0 && high == 0, tag + ": grid nodes below M_zeta " + std::to_string(low) +
                                       ", above M " + std::to_string(high));
  o.note(tag + ": " + std::to_string(nodes) + " grid nodes checked");
}

// ---------------------------------------------------------------------------
// Criteria.

Outcome criterion1() {
  Outcome o;
  struct Case {
    std::string name;
    Mat F;
    Vec z;
  };
  std::vector<Case> cases;
  {
    Mat F(8, 3);
    F << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 1, 0, -1, -1, 0, -1, 0, 1, -1, 0, -1, -1;
    Vec z(8);
    z << 1, 1, 1, 1, 0, 0, 0, 0;
    cases.push_back({"pyramid", F, perturb_to_simple(F, z, 1e-3, 1)});
  }
  {
    Mat F(4, 2);
    F << 1, 0, -1, 0, 1, -1, -1, -1;
    Vec z(4);
    z << 1, 1, 0, 0;
    cases.push_back({"epi|x|", F, z});
  }
  for (auto [f1, f2] : {std::pair{4, 6}, {6, 14}, {8, 42}}) {
    const auto td = make_template_s1(f1, f2, 100 + f1);
    cases.push_back({"S1 f=" + std::to_string(f1 + f2), td.F, td.z_bar});
  }

  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (const auto& c : cases) {
    const auto full = build_triplet(c.F, c.z, TripletKind::Nominal, EdgeMode::Full);
    const auto red = with_edge_mode(full, EdgeMode::Reduced);
    const auto zs = sample_feasible_parameters(full, 100, 11);
    const int n = static_cast<int>(c.F.cols());
    int disagree = 0, vertex_mismatch = 0, edge_mismatch = 0;
    for (const auto& z : zs) {
      // Vertices against the active-set oracle on P(z) capped high above.
      const double cap = [&] {
        double m = 0.0;
        for (int i = 0; i < full.num_vertices(); ++i) m = std::max(m, full.vertex(i, z)(n - 1));
        return m + 10.0;
      }();
      Mat Fc(c.F.rows() + 1, n);
      Fc << c.F, RowVec::Unit(n, n - 1);
      Vec zc(z.size() + 1);
      zc << z, cap;
      const Vec norms = Fc.rowwise().norm();
      const Mat Fn = norms.asDiagonal().inverse() * Fc;
      const Vec zn = zc.cwiseQuotient(norms);
      int low_vertices = 0;
      for (const auto& [x, act] : oracle::brute_force_vertices(Fn, zn)) {
        if (std::abs(x(n - 1) - cap) <= 1e-9) continue;
        ++low_vertices;
        bool found = false;
        for (int i = 0; i < full.num_vertices(); ++i) found = found || (full.vertex(i, z) - x).norm() <= 1e-7;
        if (!found) ++vertex_mismatch;
      }
      if (low_vertices != full.num_vertices()) ++vertex_mismatch;

      // Random points near the polyhedron: H-membership vs V-membership.
      Vec lo = full.vertex(0, z), hi = lo;
      for (int i = 1; i < full.num_vertices(); ++i) {
        lo = lo.cwiseMin(full.vertex(i, z));
        hi = hi.cwiseMax(full.vertex(i, z));
      }
      hi(n - 1) += 1.0;
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (int k = 0; k < 10; ++k) {
        Vec p(n);
        for (int d = 0; d < n; ++d) p(d) = lo(d) - 0.1 + (hi(d) - lo(d) + 0.2) * U(rng);
        const double viol = (c.F * p - z).maxCoeff();
        if (std::abs(viol) <= 1e-7) continue;
        if ((viol < 0) != in_vertex_hull(full, z, p, 1e-7)) ++disagree;
      }

      // Full and reduced edge rows accept the same perturbed parameters.
      for (double s : {0.0, 1e-3, 1e-2}) {
        const Vec zp = z + Vec::NullaryExpr(z.size(), [&]() { return s * g(rng); });
        const bool a = full.E.rows() == 0 || (full.E * zp).maxCoeff() <= 1e-8;
        const bool b = red.E.rows() == 0 || (red.E * zp).maxCoeff() <= 1e-8;
        if (a != b) ++edge_mismatch;
      }
    }
    o.require(disagree == 0, c.name + ": " + std::to_string(disagree) + " H/V disagreements");
    o.require(vertex_mismatch == 0, c.name + ": " + std::to_string(vertex_mismatch) + " vertex mismatches");
    o.require(edge_mismatch == 0, c.name + ": " + std::to_string(edge_mismatch) + " full/reduced mismatches");
  }
  o.note(std::to_string(cases.size()) + " templates x 100 parameters");
  return o;
}

Outcome criterion2() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  int instances = 0, mismatches = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 4)(rng);
    const int m = std::uniform_int_distribution<int>(n + 1, 14)(rng);
    Mat F(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) F(i, j) = g(rng);
    Vec z(m);
    for (int i = 0; i < m; ++i) z(i) = 0.5 + std::abs(g(rng));
    const HPolyhedron P(F, z);
    std::vector<VertexInfo> got, piv;
    try {
      got = enumerate_vertices(P);
      piv = enumerate_vertices(P, std::nullopt, VertexMethod::Pivot);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotPointed) ++mismatches;
      continue;
    }
    ++instances;
    const auto want = oracle::brute_force_vertices(P.F(), P.z());
    for (const auto* vs : {&got, &piv}) {
      bool same = vs->size() == want.size();
      for (size_t k = 0; same && k < vs->size(); ++k)
        same = (*vs)[k].active_set == want[k].second && ((*vs)[k].point - want[k].first).norm() <= 1e-9;
      if (!same) ++mismatches;
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " mismatching instances");
  o.require(instances >= 100, "only " + std::to_string(instances) + " bounded instances");
  o.note(std::to_string(instances) + " bounded instances with m <= 14, n <= 4 (default and pivoting)");
  return o;
}

Outcome criterion3() {
  Outcome o;
  auto& n = nominal_s3();
  const auto& t = n.a.triplet;
  o.note("f=" + std::to_string(t.num_facets()) + " v=" + std::to_string(t.num_vertices()) +
         " e=" + std::to_string(t.num_edge_rows()) + " f2=" + std::to_string(t.num_facets() - t.f1));
  o.require(n.r.optimal(), "synthesis " + to_string(n.r.status));
  if (!n.r.optimal()) return o;
  o.note("counted constraints " + std::to_string(n.r.size.counted_constraints));
  const auto rep = verify_clf(n.r, n.s, 2000, 201, 3);
  o.require(rep.min_residual >= -1e-6, "verify min residual " + fmt("%.3e", rep.min_residual));
  o.note("verify min " + fmt("%.3e", rep.min_residual));

  const auto x0s = sample_domain(*n.M, 20, 9);
  const auto runs = simulate_batch(n.p.sys, *n.c, n.s.cost, x0s, 50);
  int bad = 0;
  for (const auto& tr : runs) bad += (tr.breach ? 1 : 0) + static_cast<int>(tr.descent_violations.size());
  o.require(bad == 0, std::to_string(bad) + " descent violations or breaches in 20 runs");

  const double err = max_relative_error(*n.M, nominal_reference());
  if (err >= 0.20 && err <= 0.60)
    o.note("relative error " + fmt("%.3f", err));
  else
    o.require(false, "relative error " + fmt("%.3f", err) + " outside [0.20, 0.60]");
  return o;
}

Outcome criterion4() {
  Outcome o;
  auto& n = nominal_refined();
  const auto& t = n.a.triplet;
  o.note("f=" + std::to_string(t.num_facets()) + " v=" + std::to_string(t.num_vertices()) +
         " e=" + std::to_string(t.num_edge_rows()));
  o.require(n.r.optimal(), "synthesis " + to_string(n.r.status));
  if (!n.r.optimal()) return o;
  const double err = max_relative_error(*n.M, nominal_reference());
  if (err <= 0.20)
    o.note("relative error " + fmt("%.3f", err));
  else
    o.require(false, "relative error " + fmt("%.3f", err) + " above 0.20");
  return o;
}

Outcome criterion5() {
  Outcome o;
  auto& n = robust_anchored();
  const auto& t = n.a.triplet;
  const HPolyhedron& Xs = n.s.cost.target;
  const double inv = rci_invariance_residual(Xs, *n.p.K, *n.p.uncertainty);
  o.require(inv <= 1e-8, "X_s invariance residual " + fmt("%.2e", inv));
  o.note("f=" + std::to_string(t.num_facets()) + " v=" + std::to_string(t.num_vertices()) +
         " e=" + std::to_string(t.num_edge_rows()));
  o.require(n.r.optimal(), "synthesis " + to_string(n.r.status));
  if (!n.r.optimal()) return o;
  o.require(n.r.z(t.num_facets() - 1) == 0.0, "z_f != 0");
  const auto rep = verify_clf(n.r, n.s, 2000, 201, 4);
  o.require(rep.min_residual >= -1e-6, "verify min residual " + fmt("%.3e", rep.min_residual));
  o.note("verify min " + fmt("%.3e", rep.min_residual));

  // Domain vertices in angular order; an octagonal domain has only eight,
  // so edge midpoints fill up to ten starts.
  std::vector<Vec> corners;
  for (const auto& v : enumerate_vertices(n.M->domain())) corners.push_back(v.point);
  Vec mid = Vec::Zero(2);
  for (const auto& c : corners) mid += c / static_cast<double>(corners.size());
  std::sort(corners.begin(), corners.end(), [&](const Vec& a, const Vec& b) {
    return std::atan2(a(1) - mid(1), a(0) - mid(0)) < std::atan2(b(1) - mid(1), b(0) - mid(0));
  });
  std::vector<Vec> x0s(corners.begin(), corners.begin() + std::min<size_t>(corners.size(), 10));
  for (size_t k = 0; x0s.size() < 10 && k < corners.size(); k += 2)
    x0s.push_back(0.5 * (corners[k] + corners[(k + 1) % corners.size()]));
  int breaches = 0, late = 0, left = 0;
  for (double sign : {1.0, -1.0}) {
    const Vec w = sign / 40.0 * Vec::Ones(2);
    for (const auto& tr : simulate_batch(n.p.sys, *n.c, n.s.cost, x0s, 80, ExtremeConstant{w})) {
      if (tr.breach) {
        ++breaches;
        continue;
      }
      int first = -1;
      for (int k = 0; k < static_cast<int>(tr.states.size()); ++k) {
        const bool in = Xs.contains(tr.states[k], 1e-9);
        if (in && first < 0) first = k;
        if (!in && first >= 0) ++left;
      }
      if (first < 0 || first > 60) ++late;
    }
  }
  o.require(breaches == 0, std::to_string(breaches) + " runs breached dom(M)");
  o.require(late == 0, std::to_string(late) + " runs did not reach X_s within 60 steps");
  o.require(left == 0, std::to_string(left) + " states left X_s after entering");
  o.note(std::to_string(2 * x0s.size()) + " extreme-disturbance runs from " + std::to_string(corners.size()) +
         " vertices and " + std::to_string(x0s.size() - std::min<size_t>(corners.size(), 10)) + " edge midpoints");

  const double err = max_relative_error(*n.M, robust_reference());
  if (err >= 0.25 && err <= 0.65)
    o.note("relative error " + fmt("%.3f", err));
  else
    o.require(false, "relative error " + fmt("%.3f", err) + " outside [0.25, 0.65]");
  return o;
}

Outcome criterion6() {
  Outcome o;
  auto& a = nominal_s3();
  auto& b = robust_anchored();
  o.require(a.r.optimal() && b.r.optimal(), "a synthesis failed");
  if (!o.pass) return o;
  sandwich(a, nominal_reference(), o, "nominal");
  sandwich(b, robust_reference(), o, "robust");
  return o;
}

Outcome criterion7() {
  Outcome o;
  auto& n = nominal_s3();
  const auto& F = n.a.triplet.F;
  const auto P = problem_lqr(n.p);
  const auto cost = StageCost::quadratic(n.p.Q, n.p.R);
  Vec prev;
  double rise = 0.0;
  for (int N = 0; N <= 5; ++N) {
    const Vec z = zeta_nominal(F, n.p.sys, cost, &P, N);
    if (N > 0) rise = std::max(rise, (z - prev).maxCoeff());
    prev = z;
  }
  o.require(rise <= 1e-8, "zeta^N increased by " + fmt("%.2e", rise));
  o.note("max increase " + fmt("%.2e", rise));

  const auto zero = no_uncertainty(n.p.sys.A, n.p.sys.B);
  double gap = 0.0;
  for (int N : {1, 3, 5}) {
    ZetaOptions zo;
    zo.max_horizon = 5;
    const Vec a = zeta_minmax(F, n.p.sys, zero, cost, &P, N, zo);
    const Vec b = zeta_nominal(F, n.p.sys, cost, &P, N);
    gap = std::max(gap, (a - b).cwiseAbs().maxCoeff());
  }
  o.require(gap <= 1e-7, "degenerate min-max differs by " + fmt("%.2e", gap));
  o.note("min-max gap " + fmt("%.2e", gap));
  return o;
}

Outcome criterion8() {
  Outcome o;
  const auto p = nominal_example();
  const auto cost = StageCost::quadratic(p.Q, p.R);
  const auto P = lqr_underestimator(p.sys, cost);
  const double res = (riccati_step(P.P, p.sys.A, p.sys.B, p.Q, p.R) - P.P).cwiseAbs().maxCoeff();
  o.require(res <= 1e-10, "Riccati residual " + fmt("%.2e", res));
  o.note("Riccati residual " + fmt("%.2e", res));

  const auto& ref = nominal_reference();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int checked = 0, above = 0;
  double worst = -kInf;
  for (int tries = 0; checked < 100 && tries < 100000; ++tries) {
    Vec x(2);
    x << -1 + 3 * U(rng), -1 + 3 * U(rng);
    const double r = ref.eval(x);
    if (!std::isfinite(r) || !std::isfinite(ref.cell_variation(x))) continue;
    ++checked;
    const double d = P.eval(x) - r - ref.cell_variation(x);
    worst = std::max(worst, d);
    if (d > 1e-9) ++above;
  }
  o.require(checked == 100, "only " + std::to_string(checked) + " interior samples");
  o.require(above == 0, std::to_string(above) + " samples with LQR above the grid reference");
  o.note("max (LQR - ref - cell) " + fmt("%.3e", worst));
  return o;
}

Outcome criterion9() {
  Outcome o;
  int done = 0;
  for (auto* get : {&nominal_s3, &nominal_refined, &robust_anchored}) {
    auto& n = get();
    if (!n.r.optimal()) continue;
    property_suite(n, o, n.p.name + " f=" + std::to_string(n.a.triplet.num_facets()), 17);
    ++done;
    o.note(n.p.name + " f=" + std::to_string(n.a.triplet.num_facets()) + " checked on 2000 samples");
  }
  o.require(done == 3, std::to_string(3 - done) + " syntheses unavailable");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    double budget;  // seconds
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "triplet correctness", 30, criterion1},
      {2, "vertex enumeration vs active-set oracle", 10, criterion2},
      {3, "nominal double integrator, S3 template", 300, criterion3},
      {4, "refined nominal template", 1200, criterion4},
      {5, "robust double integrator", 600, criterion5},
      {6, "sandwich property", kInf, criterion6},
      {7, "zeta monotonicity", kInf, criterion7},
      {8, "Riccati under-estimator", kInf, criterion8},
      {9, "convexity and continuity", kInf, criterion9},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    const double t0 = now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double dt = now() - t0;
    if (dt > c.budget) o.require(false, "runtime " + fmt("%.1f s", dt) + " over budget " + fmt("%.0f s", c.budget));
    std::printf("[%s] %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, dt, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
