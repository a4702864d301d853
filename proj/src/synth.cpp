#include "polyclf/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "polyclf/bounds.hpp"
#include "polyclf/error.hpp"

namespace polyclf {

namespace {

void check_spec(const SynthesisSpec& spec, bool robust) {
  const auto& t = spec.triplet;
  if (t.kind == TripletKind::Domain)
    throw Error(ErrorCode::ModeMismatch, "synthesis needs an epigraph triplet");
  if (robust != spec.robust())
    throw Error(ErrorCode::ModeMismatch, robust ? "robust synthesis needs a robust triplet"
                                                : "nominal synthesis needs a nominal triplet");
  if (robust && (!spec.uncertainty || !spec.target_zs))
    throw Error(ErrorCode::ModeMismatch, "robust synthesis needs an uncertainty model and target_zs");
  if (t.state_dim() != spec.system.nx())
    throw Error(ErrorCode::InvalidArgument, "triplet and system dimensions differ");
  if (spec.lambda < 0.0 || spec.lambda > 1.0)
    throw Error(ErrorCode::InvalidArgument, "lambda must lie in [0, 1]");
  if (spec.freeze_z1 && spec.freeze_z1->size() != t.f1)
    throw Error(ErrorCode::InvalidArgument, "freeze_z1 must have f1 entries");
  if (robust && spec.target_zs->size() != t.f1)
    throw Error(ErrorCode::InvalidArgument, "target_zs must have f1 entries");
  if (robust) spec.uncertainty->validate(spec.system.nx(), spec.system.nu());
  const int f = t.num_facets();
  if (const auto* lin = std::get_if<LinearObjective>(&spec.objective)) {
    if (lin->c.size() != f) throw Error(ErrorCode::InvalidArgument, "objective c must have f entries");
  } else {
    const auto& inf = std::get<InfDistanceObjective>(spec.objective);
    if (inf.weights.size() != f || inf.zeta.size() != f)
      throw Error(ErrorCode::InvalidArgument, "weights and zeta must have f entries");
  }
}

LinExpr row_times(const RowVec& g, const std::vector<LinExpr>& x) {
  LinExpr e;
  for (int c = 0; c < g.size(); ++c)
    if (g(c) != 0.0) e += g(c) * x[c];
  return e;
}

}  // namespace

SynthesisProgram build_synthesis_program(const SynthesisSpec& spec) {
  const bool robust = spec.robust();
  check_spec(spec, robust);
  const auto& t = spec.triplet;
  const auto& sys = spec.system;
  const int f = t.num_facets(), v = t.num_vertices(), nx = sys.nx(), nu = sys.nu();
  const double lambda = spec.lambda;

  SynthesisProgram sp;
  ConvexProgram& p = sp.program;
  sp.z_block = p.add_variable("z", f);
  auto zvar = [&](int j) { return LinExpr::var(p.var(sp.z_block, j)); };
  for (int i = 0; i < v; ++i) sp.v_blocks.push_back(p.add_variable("v" + std::to_string(i), nu));
  sp.y_block = p.add_variable("y", v);

  if (spec.freeze_z1)
    for (int j = 0; j < t.f1; ++j) p.fix(p.var(sp.z_block, j), (*spec.freeze_z1)(j));
  if (robust) {
    p.fix(p.var(sp.z_block, f - 1), 0.0);
  } else {
    // V_1 z = 0 with an invertible active-set block means z_{J_1} = 0.
    for (int j : t.active[0]) {
      if (spec.freeze_z1 && j < t.f1 && (*spec.freeze_z1)(j) != 0.0)
        throw Error(ErrorCode::Infeasible, "frozen domain row conflicts with V_1 z = 0");
      p.fix(p.var(sp.z_block, j), 0.0);
    }
  }

  std::vector<std::pair<Mat, Mat>> AB;
  Vec wbar = Vec::Zero(f);
  if (robust) {
    AB = spec.uncertainty->AB;
    wbar = spec.uncertainty->support_rows(t.F.leftCols(nx));
  } else {
    AB.emplace_back(sys.A, sys.B);
  }
  const Mat G = t.F.leftCols(nx);
  const Vec h = t.F.col(nx);
  Mat W = Mat::Zero(nx + nu, nx + nu);
  W.topLeftCorner(nx, nx) = spec.cost.Q;
  W.bottomRightCorner(nu, nu) = spec.cost.R;
  const bool pd_weights =
      Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (W + W.transpose())).eigenvalues()(0) > 0.0;

  for (int i = 0; i < v; ++i) {
    std::vector<LinExpr> Rz(nx);
    LinExpr sz;
    for (int r = 0; r <= nx; ++r) {
      LinExpr e;
      for (size_t k = 0; k < t.active[i].size(); ++k) {
        const double c = t.coef(i, r, static_cast<int>(k));
        if (c != 0.0) e += c * zvar(t.active[i][k]);
      }
      if (r < nx)
        Rz[r] = e;
      else
        sz = e;
    }
    std::vector<LinExpr> vi;
    for (int k = 0; k < nu; ++k) vi.push_back(LinExpr::var(p.var(sp.v_blocks[i], k)));
    const LinExpr yi = LinExpr::var(p.var(sp.y_block, i));

    // Robust vertices on the flat facet sit at height 0 and have y_i >= 0
    // from the flat descent row, so L(R_i z, v_i) = 0.  With Q, R > 0 that
    // is linear: R_i z in the zero set of L and v_i = K R_i z (or 0).  The
    // cone would have no interior point there.
    const bool flat = robust && pd_weights &&
                      std::find(t.active[i].begin(), t.active[i].end(), f - 1) != t.active[i].end();
    if (flat) {
      p.fix(p.var(sp.y_block, i), 0.0);
      const bool sd = spec.cost.kind == StageCost::Kind::SetDistance;
      if (sd)
        for (int r = 0; r < spec.cost.target.rows(); ++r)
          p.add_leq(row_times(spec.cost.target.F().row(r), Rz), LinExpr(spec.cost.target.z()(r)),
                    "cost");
      else
        for (int k = 0; k < nx; ++k) p.add_eq(Rz[k], LinExpr(0.0), "cost");
      for (int k = 0; k < nu; ++k)
        p.add_eq(vi[k], sd ? row_times(spec.cost.K.row(k), Rz) : LinExpr(0.0), "cost");
    }

    // Stage cost: L(R_i z, v_i) + y_i <= s_i' z.
    std::vector<LinExpr> args;
    if (spec.cost.kind == StageCost::Kind::Quadratic) {
      args = Rz;
      args.insert(args.end(), vi.begin(), vi.end());
    } else if (!flat) {
      const int xi = p.add_variable("xi" + std::to_string(i), nx);
      std::vector<LinExpr> xiv;
      for (int k = 0; k < nx; ++k) xiv.push_back(LinExpr::var(p.var(xi, k)));
      for (int r = 0; r < spec.cost.target.rows(); ++r)
        p.add_leq(row_times(spec.cost.target.F().row(r), xiv), LinExpr(spec.cost.target.z()(r)),
                  "target");
      for (int k = 0; k < nx; ++k) args.push_back(Rz[k] - xiv[k]);
      for (int k = 0; k < nu; ++k) args.push_back(vi[k] - row_times(spec.cost.K.row(k), Rz));
    }
    if (!flat) p.add_quadratic(W, args, sz - yi, "cost");

    // Successor rows for every (A_l, B_l).
    for (const auto& [A, B] : AB) {
      std::vector<LinExpr> next(nx);
      for (int r = 0; r < nx; ++r) next[r] = row_times(A.row(r), Rz) + row_times(B.row(r), vi);
      for (int j = 0; j < f; ++j) {
        LinExpr lhs = row_times(G.row(j), next);
        lhs.add_constant(wbar(j));
        if (j < t.f1) {
          LinExpr rhs = lambda * zvar(j);
          if (robust) rhs.add_constant((1.0 - lambda) * (*spec.target_zs)(j));
          p.add_leq(lhs, rhs, "contraction");
        } else {
          lhs += h(j) * yi;
          p.add_leq(lhs, zvar(j), "descent");
        }
      }
    }
    for (int r = 0; r < sys.X.rows(); ++r)
      p.add_leq(row_times(sys.X.F().row(r), Rz), LinExpr(sys.X.z()(r)), "state");
    for (int r = 0; r < sys.U.rows(); ++r)
      p.add_leq(row_times(sys.U.F().row(r), vi), LinExpr(sys.U.z()(r)), "input");
  }

  for (int r = 0; r < t.E.rows(); ++r) {
    LinExpr e;
    for (SpMat::InnerIterator it(t.E, r); it; ++it) e += it.value() * zvar(static_cast<int>(it.col()));
    p.add_leq(e, LinExpr(0.0), "edge");
  }

  if (const auto* lin = std::get_if<LinearObjective>(&spec.objective)) {
    LinExpr obj;
    for (int j = 0; j < f; ++j)
      if (lin->c(j) != 0.0) obj += lin->c(j) * zvar(j);
    p.minimize(obj);
  } else {
    const auto& inf = std::get<InfDistanceObjective>(spec.objective);
    std::vector<LinExpr> rows;
    for (int j = 0; j < f; ++j) rows.push_back(zvar(j) - LinExpr(inf.zeta(j)));
    const int tv = add_inf_norm_epigraph(p, rows, inf.weights);
    p.minimize(LinExpr::var(tv));
  }
  return sp;
}

namespace {

SynthesisResult run(const SynthesisSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthesisProgram sp = build_synthesis_program(spec);
  const auto& t = spec.triplet;
  const auto& sys = spec.system;
  const auto& p = sp.program;

  SynthesisResult r;
  r.lambda = spec.lambda;
  r.robust = spec.robust();
  const int f = t.num_facets(), v = t.num_vertices();
  r.size.variables = p.num_variables() - p.num_fixed();
  r.size.affine_rows = p.num_affine_rows();
  r.size.quadratic = p.num_quadratic();
  const int lbar = r.robust ? spec.uncertainty->num_ab() : 1;
  r.size.counted_variables = f + v * (1 + sys.nu());
  r.size.counted_constraints = v * (1 + f * lbar + sys.X.rows() + sys.U.rows()) +
                               t.num_edge_rows() + (r.robust ? f : sys.nx());

  const Solution s = solve(p, spec.solver);
  r.status = s.status;
  r.iterations = s.iterations;
  r.objective = s.objective;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s.status != SolveStatus::Optimal) return r;
  r.z = s.block(p, sp.z_block);
  for (int b : sp.v_blocks) r.v.push_back(s.block(p, b));
  r.y = s.block(p, sp.y_block);
  r.residuals = p.residuals_by_family(s.x);
  return r;
}

}  // namespace

SynthesisResult synth_nominal(const SynthesisSpec& spec) {
  check_spec(spec, false);
  return run(spec);
}

SynthesisResult synth_robust(const SynthesisSpec& spec) {
  check_spec(spec, true);
  return run(spec);
}

SynthesisResult synthesize(const SynthesisSpec& spec) {
  return spec.robust() ? synth_robust(spec) : synth_nominal(spec);
}

PwaFunction make_function(const SynthesisSpec& spec, const SynthesisResult& r) {
  if (!r.optimal()) throw Error(ErrorCode::InvalidArgument, "synthesis result is not optimal");
  return PwaFunction(spec.triplet, r.z);
}

ExplicitController make_controller(const SynthesisSpec& spec, const SynthesisResult& r) {
  return ExplicitController(make_function(spec, r), r.v);
}

std::vector<Vec> sample_domain(const PwaFunction& M, int n, std::uint64_t seed) {
  std::vector<Vec> out;
  if (n <= 0) return out;
  const int nx = M.state_dim();
  Vec lo = Vec::Constant(nx, kInf), hi = Vec::Constant(nx, -kInf);
  for (const auto& p : M.vertex_points()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  long tries = 0;
  while (static_cast<int>(out.size()) < n) {
    if (++tries > 1000L * n + 100000)
      throw Error(ErrorCode::InvalidArgument, "domain has negligible volume for rejection sampling");
    Vec x(nx);
    for (int d = 0; d < nx; ++d) x(d) = lo(d) + (hi(d) - lo(d)) * U(rng);
    if (M.in_domain(x, 0.0)) out.push_back(x);
  }
  return out;
}

VerificationReport verify_clf(const SynthesisResult& r, const SynthesisSpec& spec, int n_samples,
                              int u_res, std::uint64_t seed, double tol) {
  VerificationReport rep;
  rep.tol = tol;
  if (n_samples <= 0) return rep;
  const ExplicitController ctrl = make_controller(spec, r);
  const PwaFunction& M = ctrl.function();
  const auto xs = sample_domain(M, n_samples, seed);
  const UncertaintyModel* unc = spec.robust() ? &*spec.uncertainty : nullptr;
  const int n = static_cast<int>(xs.size());
  Vec res(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (int k = 0; k < n; ++k) {
    HjbSearch search;
    search.u_res = u_res;
    search.candidates.push_back(ctrl.feedback(xs[k]));
    res(k) = hjb_residual(M, spec.system, spec.cost, unc, xs[k], search);
  }
  rep.samples = n;
  int worst = 0;
  for (int k = 0; k < n; ++k) {
    if (res(k) < -tol) ++rep.violations;
    if (res(k) < res(worst)) worst = k;
  }
  rep.min_residual = res.minCoeff();
  rep.mean_residual = res.mean();
  rep.worst_x = xs[worst];
  return rep;
}

}  // namespace polyclf
