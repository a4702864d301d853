#include "polyclf/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "polyclf/error.hpp"

namespace polyclf {

Mat riccati_step(const Mat& P, const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const Mat BtP = B.transpose() * P;
  const Mat S = R + BtP * B;
  const Mat K = S.ldlt().solve(BtP * A);
  Mat next = Q + A.transpose() * P * A - (BtP * A).transpose() * K;
  return 0.5 * (next + next.transpose());
}

QuadForm lqr_underestimator(const LinearSystem& sys, const StageCost& cost, double tol,
                            int max_iter) {
  if (cost.kind != StageCost::Kind::Quadratic)
    throw Error(ErrorCode::ModeMismatch, "LQR under-estimator needs a quadratic stage cost");
  Mat P = cost.Q;
  for (int it = 0; it < max_iter; ++it) {
    const Mat next = riccati_step(P, sys.A, sys.B, cost.Q, cost.R);
    if (!next.allFinite() || next.norm() > 1e14)
      throw Error(ErrorCode::NotStabilizable, "Riccati iteration diverges");
    const double step = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (step <= tol) return {P};
  }
  throw Error(ErrorCode::NotStabilizable, "Riccati iteration did not settle");
}

Mat lqr_gain(const QuadForm& P, const LinearSystem& sys, const StageCost& cost) {
  const Mat BtP = sys.B.transpose() * P.P;
  return -(cost.R + BtP * sys.B).ldlt().solve(BtP * sys.A);
}

namespace {

std::vector<LinExpr> block_exprs(const ConvexProgram& p, int block) {
  std::vector<LinExpr> out;
  for (int k = 0; k < p.block(block).size; ++k) out.push_back(LinExpr::var(p.var(block, k)));
  return out;
}

void add_membership(ConvexProgram& p, const HPolyhedron& set, const std::vector<LinExpr>& x,
                    const std::string& family) {
  for (int r = 0; r < set.rows(); ++r) {
    LinExpr e;
    for (int c = 0; c < set.dim(); ++c)
      if (set.F()(r, c) != 0.0) e += set.F()(r, c) * x[c];
    p.add_leq(e, LinExpr(set.z()(r)), family);
  }
}

// x_next = A x + B u + w as equality rows.
void add_dynamics(ConvexProgram& p, const Mat& A, const Mat& B, const Vec& w,
                  const std::vector<LinExpr>& x, const std::vector<LinExpr>& u,
                  const std::vector<LinExpr>& x_next) {
  for (int r = 0; r < A.rows(); ++r) {
    LinExpr rhs(w(r));
    for (int c = 0; c < A.cols(); ++c)
      if (A(r, c) != 0.0) rhs += A(r, c) * x[c];
    for (int c = 0; c < B.cols(); ++c)
      if (B(r, c) != 0.0) rhs += B(r, c) * u[c];
    p.add_eq(x_next[r], rhs, "dynamics");
  }
}

Mat block_diag(const std::vector<Mat>& blocks) {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.rows());
  Mat out = Mat::Zero(n, n);
  int off = 0;
  for (const auto& b : blocks) {
    out.block(off, off, b.rows(), b.cols()) = b;
    off += static_cast<int>(b.rows());
  }
  return out;
}

// Arguments and weights whose quadratic form is L(x, u); set-distance costs
// get a projection variable xi in the target.
void stage_terms(ConvexProgram& p, const StageCost& cost, const std::vector<LinExpr>& x,
                 const std::vector<LinExpr>& u, const std::string& tag,
                 std::vector<LinExpr>& args, std::vector<Mat>& weights) {
  const int nx = static_cast<int>(x.size());
  const int nu = static_cast<int>(u.size());
  if (cost.kind == StageCost::Kind::Quadratic) {
    for (const auto& e : x) args.push_back(e);
    for (const auto& e : u) args.push_back(e);
    weights.push_back(cost.Q);
    weights.push_back(cost.R);
    return;
  }
  const int xi = p.add_variable("xi_" + tag, nx);
  const auto xiv = block_exprs(p, xi);
  add_membership(p, cost.target, xiv, "target");
  for (int k = 0; k < nx; ++k) args.push_back(x[k] - xiv[k]);
  for (int k = 0; k < nu; ++k) {
    LinExpr d = u[k];
    for (int c = 0; c < nx; ++c)
      if (cost.K(k, c) != 0.0) d -= cost.K(k, c) * x[c];
    args.push_back(d);
  }
  weights.push_back(cost.Q);
  weights.push_back(cost.R);
}

struct Trajectory {
  std::vector<std::vector<LinExpr>> x;  // N + 1
  std::vector<std::vector<LinExpr>> u;  // N
};

// Admissible N-step trajectory with a single epigraph variable t >= total
// cost (one stacked quadratic constraint).  Returns the index of t, or -1
// when the cost is not needed.
int build_chain(ConvexProgram& p, const LinearSystem& sys, const StageCost& cost,
                const QuadForm* Mbar, int N, bool with_cost, Trajectory& tr) {
  for (int k = 0; k <= N; ++k) {
    tr.x.push_back(block_exprs(p, p.add_variable("x" + std::to_string(k), sys.nx())));
    add_membership(p, sys.X, tr.x.back(), "state");
  }
  for (int k = 0; k < N; ++k) {
    tr.u.push_back(block_exprs(p, p.add_variable("u" + std::to_string(k), sys.nu())));
    add_membership(p, sys.U, tr.u.back(), "input");
    add_dynamics(p, sys.A, sys.B, Vec::Zero(sys.nx()), tr.x[k], tr.u[k], tr.x[k + 1]);
  }
  if (!with_cost) return -1;
  std::vector<LinExpr> args;
  std::vector<Mat> weights;
  for (int k = 0; k < N; ++k) stage_terms(p, cost, tr.x[k], tr.u[k], std::to_string(k), args, weights);
  if (Mbar) {
    for (const auto& e : tr.x[N]) args.push_back(e);
    weights.push_back(Mbar->P);
  }
  const int t = p.add_variable("t");
  if (args.empty()) {
    p.add_eq(LinExpr::var(p.var(t)), LinExpr(0.0), "cost");
  } else {
    p.add_quadratic(block_diag(weights), args, LinExpr::var(p.var(t)), "cost");
  }
  return t;
}

void check_facets(const Mat& F, const LinearSystem& sys) {
  if (F.cols() != sys.nx() + 1) throw Error(ErrorCode::InvalidArgument, "F must have n_x + 1 columns");
  for (int i = 0; i < F.rows(); ++i)
    if (F(i, sys.nx()) > 0.0)
      throw Error(ErrorCode::AssumptionViolated, "row " + std::to_string(i) + " has h_i > 0");
}

template <class RowFn>
Vec for_each_row(int f, bool parallel, RowFn&& fn) {
  Vec out(f);
  if (!parallel) {
    for (int i = 0; i < f; ++i) out(i) = fn(i);
    return out;
  }
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < f; ++i) {
    try {
      out(i) = fn(i);
    } catch (...) {
#pragma omp critical(polyclf_zeta_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

double finish(const Solution& s, int row) {
  if (s.status == SolveStatus::Infeasible)
    throw Error(ErrorCode::Infeasible, "no admissible trajectory for row " + std::to_string(row));
  if (s.status == SolveStatus::Unbounded)
    throw Error(ErrorCode::Unbounded, "bound problem unbounded for row " + std::to_string(row));
  return s.objective;
}

}  // namespace

Vec zeta_nominal(const Mat& F, const LinearSystem& sys, const StageCost& cost, const QuadForm* Mbar,
                 int N, const ZetaOptions& opt) {
  check_facets(F, sys);
  if (N < 0) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 0");
  const int nx = sys.nx();
  return for_each_row(static_cast<int>(F.rows()), opt.parallel, [&](int i) {
    const double h = F(i, nx);
    ConvexProgram p;
    Trajectory tr;
    const int t = build_chain(p, sys, cost, Mbar, N, h < 0.0, tr);
    LinExpr obj;
    for (int c = 0; c < nx; ++c)
      if (F(i, c) != 0.0) obj += F(i, c) * tr.x[0][c];
    if (t >= 0) obj += h * LinExpr::var(p.var(t));
    p.maximize(obj);
    return finish(solve(p, opt.solver), i);
  });
}

std::vector<Vec> distinct_w_vertices(const UncertaintyModel& unc) {
  std::vector<Vec> out;
  for (const auto& w : unc.W_vertices()) {
    bool dup = false;
    for (const auto& o : out) dup = dup || (o - w).cwiseAbs().maxCoeff() <= 1e-12;
    if (!dup) out.push_back(w);
  }
  return out;
}

long scenario_tree_nodes(int branches, int N) {
  long total = 0, level = 1;
  for (int d = 0; d <= N; ++d) {
    total += level;
    if (total > (1L << 40)) return total;
    level *= branches;
  }
  return total;
}

Vec zeta_minmax(const Mat& F, const LinearSystem& sys, const UncertaintyModel& unc,
                const StageCost& cost, const QuadForm* Mbar, int N, const ZetaOptions& opt) {
  check_facets(F, sys);
  unc.validate(sys.nx(), sys.nu());
  if (N < 0) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 0");
  const auto wv = distinct_w_vertices(unc);
  const int b = unc.num_ab() * static_cast<int>(wv.size());
  const long nodes = scenario_tree_nodes(b, N);
  if (N > opt.max_horizon || nodes > opt.max_nodes)
    throw Error(ErrorCode::TreeTooLarge, "scenario tree with " + std::to_string(nodes) +
                                             " nodes at horizon " + std::to_string(N));
  const int nx = sys.nx();

  // Nodes by depth; children of node j at depth d are j*b + br at depth d+1,
  // so a node's index encodes its uncertainty history and controls at a node
  // are shared by every scenario through it.
  return for_each_row(static_cast<int>(F.rows()), opt.parallel, [&](int i) {
    const double h = F(i, nx);
    ConvexProgram p;
    std::vector<std::vector<std::vector<LinExpr>>> xs(N + 1);
    std::vector<std::vector<LinExpr>> cost_var(N + 1);  // per node epigraph
    long width = 1;
    for (int d = 0; d <= N; ++d, width *= b) {
      for (long j = 0; j < width; ++j) {
        const std::string tag = std::to_string(d) + "_" + std::to_string(j);
        xs[d].push_back(block_exprs(p, p.add_variable("x" + tag, nx)));
        add_membership(p, sys.X, xs[d].back(), "state");
      }
    }
    width = 1;
    for (int d = 0; d < N; ++d, width *= b) {
      for (long j = 0; j < width; ++j) {
        const std::string tag = std::to_string(d) + "_" + std::to_string(j);
        const auto u = block_exprs(p, p.add_variable("u" + tag, sys.nu()));
        add_membership(p, sys.U, u, "input");
        for (int l = 0; l < unc.num_ab(); ++l)
          for (size_t w = 0; w < wv.size(); ++w) {
            const long child = j * b + l * static_cast<long>(wv.size()) + static_cast<long>(w);
            add_dynamics(p, unc.AB[l].first, unc.AB[l].second, wv[w], xs[d][j], u,
                         xs[d + 1][child]);
          }
        if (h < 0.0) {
          std::vector<LinExpr> args;
          std::vector<Mat> weights;
          stage_terms(p, cost, xs[d][j], u, tag, args, weights);
          const int c = p.add_variable("c" + tag);
          p.add_quadratic(block_diag(weights), args, LinExpr::var(p.var(c)), "cost");
          cost_var[d].push_back(LinExpr::var(p.var(c)));
        }
      }
    }
    LinExpr obj;
    for (int c = 0; c < nx; ++c)
      if (F(i, c) != 0.0) obj += F(i, c) * xs[0][0][c];
    if (h < 0.0) {
      const int tau = p.add_variable("tau");
      const LinExpr tauv = LinExpr::var(p.var(tau));
      for (long leaf = 0; leaf < width; ++leaf) {
        LinExpr path;
        long j = leaf;
        for (int d = N - 1; d >= 0; --d) {
          j /= b;
          path += cost_var[d][j];
        }
        if (Mbar) {
          const int c = p.add_variable("cN_" + std::to_string(leaf));
          p.add_quadratic(Mbar->P, xs[N][leaf], LinExpr::var(p.var(c)), "terminal");
          path += LinExpr::var(p.var(c));
        }
        p.add_leq(path, tauv, "scenario");
      }
      obj += h * tauv;
    }
    p.maximize(obj);
    return finish(solve(p, opt.solver), i);
  });
}

double ocp_value(const LinearSystem& sys, const StageCost& cost, const QuadForm* Mbar, int N,
                 const Vec& x0, const SolverOptions& opt) {
  ConvexProgram p;
  Trajectory tr;
  const int t = build_chain(p, sys, cost, Mbar, N, true, tr);
  for (int c = 0; c < sys.nx(); ++c) p.fix(tr.x[0][c].terms()[0].var, x0(c));
  p.minimize(LinExpr::var(p.var(t)));
  const Solution s = solve(p, opt);
  if (s.status == SolveStatus::Infeasible) return kInf;
  if (s.status != SolveStatus::Optimal)
    throw Error(ErrorCode::SolverFailure, "finite-horizon problem: " + to_string(s.status));
  return s.objective;
}

// ---------------------------------------------------------------------------
// Grid value iteration.

namespace {

struct Cell {
  int a, b;
  double ta, tb;
};

bool locate_cell(const GridFunction& g, const Vec& x, Cell& c) {
  const int n0 = static_cast<int>(g.axis0.size()), n1 = static_cast<int>(g.axis1.size());
  const double h0 = (g.axis0(n0 - 1) - g.axis0(0)) / (n0 - 1);
  const double h1 = (g.axis1(n1 - 1) - g.axis1(0)) / (n1 - 1);
  const double s0 = (x(0) - g.axis0(0)) / h0, s1 = (x(1) - g.axis1(0)) / h1;
  const double eps = 1e-9;
  if (s0 < -eps || s1 < -eps || s0 > n0 - 1 + eps || s1 > n1 - 1 + eps) return false;
  c.a = std::clamp(static_cast<int>(std::floor(s0)), 0, n0 - 2);
  c.b = std::clamp(static_cast<int>(std::floor(s1)), 0, n1 - 2);
  c.ta = std::clamp(s0 - c.a, 0.0, 1.0);
  c.tb = std::clamp(s1 - c.b, 0.0, 1.0);
  return true;
}

double interp(const Mat& v, const Cell& c) {
  const double v00 = v(c.a, c.b), v10 = v(c.a + 1, c.b), v01 = v(c.a, c.b + 1),
               v11 = v(c.a + 1, c.b + 1);
  if (!std::isfinite(v00 + v10 + v01 + v11)) return kInf;
  return (1 - c.ta) * (1 - c.tb) * v00 + c.ta * (1 - c.tb) * v10 + (1 - c.ta) * c.tb * v01 +
         c.ta * c.tb * v11;
}

double node_update(const BellmanProblem& bp, const GridFunction& g, const Mat& values, int node) {
  const Vec& x = bp.points[node];
  const bool set_dist = bp.cost->kind == StageCost::Kind::SetDistance;
  const double r = bp.cost->R(0, 0);
  const Mat& DF = bp.domain->F();
  const Vec& Dz = bp.domain->z();
  const int nrows = static_cast<int>(DF.rows());
  const int n0 = static_cast<int>(g.axis0.size()), n1 = static_cast<int>(g.axis1.size());
  const double o0 = g.axis0(0), o1 = g.axis1(0);
  const double h0 = (g.axis0(n0 - 1) - o0) / (n0 - 1), h1 = (g.axis1(n1 - 1) - o1) / (n1 - 1);

  // Next state for u = 0 and its derivative in u, per (A, B) vertex.
  double base[8][2], dir[8][2];
  const int nab = std::min<int>(static_cast<int>(bp.AB.size()), 8);
  for (int l = 0; l < nab; ++l) {
    const Mat& A = bp.AB[l].first;
    const Mat& B = bp.AB[l].second;
    base[l][0] = A(0, 0) * x(0) + A(0, 1) * x(1);
    base[l][1] = A(1, 0) * x(0) + A(1, 1) * x(1);
    dir[l][0] = B(0, 0);
    dir[l][1] = B(1, 0);
  }
  auto value_at = [&](double p0, double p1) {
    for (int k = 0; k < nrows; ++k)
      if (DF(k, 0) * p0 + DF(k, 1) * p1 > Dz(k) + 1e-9) return kInf;
    const double s0 = (p0 - o0) / h0, s1 = (p1 - o1) / h1;
    if (s0 < -1e-9 || s1 < -1e-9 || s0 > n0 - 1 + 1e-9 || s1 > n1 - 1 + 1e-9) return kInf;
    const int a = std::clamp(static_cast<int>(std::floor(s0)), 0, n0 - 2);
    const int b = std::clamp(static_cast<int>(std::floor(s1)), 0, n1 - 2);
    const Cell c{a, b, std::clamp(s0 - a, 0.0, 1.0), std::clamp(s1 - b, 0.0, 1.0)};
    return interp(values, c);
  };

  double best = kInf;
  for (int k = 0; k < bp.u_grid.size(); ++k) {
    const double u = bp.u_grid(k);
    const double du = set_dist ? u - bp.KX(0, node) : u;
    const double stage = bp.state_cost(node) + r * du * du;
    if (stage >= best) continue;
    double worst = 0.0;
    for (int l = 0; l < nab && std::isfinite(worst); ++l) {
      const double p0 = base[l][0] + dir[l][0] * u, p1 = base[l][1] + dir[l][1] * u;
      for (const auto& w : bp.W) {
        worst = std::max(worst, value_at(p0 + w(0), p1 + w(1)));
        if (!std::isfinite(worst)) break;
      }
    }
    best = std::min(best, stage + worst);
  }
  return best;
}

}  // namespace

double GridFunction::eval(const Vec& x) const {
  Cell c;
  if (!locate_cell(*this, x, c)) return kInf;
  return interp(values, c);
}

double GridFunction::cell_variation(const Vec& x) const {
  Cell c;
  if (!locate_cell(*this, x, c)) return kInf;
  const double v[4] = {values(c.a, c.b), values(c.a + 1, c.b), values(c.a, c.b + 1),
                       values(c.a + 1, c.b + 1)};
  return *std::max_element(v, v + 4) - *std::min_element(v, v + 4);
}

double GridFunction::max_cell_variation() const {
  double out = 0.0;
  for (int a = 0; a + 1 < values.rows(); ++a)
    for (int b = 0; b + 1 < values.cols(); ++b) {
      if (!(mask(a, b) || mask(a + 1, b) || mask(a, b + 1) || mask(a + 1, b + 1))) continue;
      const double v[4] = {values(a, b), values(a + 1, b), values(a, b + 1), values(a + 1, b + 1)};
      const double hi = *std::max_element(v, v + 4), lo = *std::min_element(v, v + 4);
      if (std::isfinite(hi)) out = std::max(out, hi - lo);
    }
  return out;
}

double GridFunction::max_value() const {
  double out = 0.0;
  for (int a = 0; a < values.rows(); ++a)
    for (int b = 0; b < values.cols(); ++b)
      if (mask(a, b) && std::isfinite(values(a, b))) out = std::max(out, values(a, b));
  return out;
}

BellmanProblem make_bellman_problem(const LinearSystem& sys, const StageCost& cost,
                                    const HPolyhedron& domain, const UncertaintyModel* unc,
                                    const GridFunction& grid, int u_res) {
  if (sys.nx() != 2 || sys.nu() != 1)
    throw Error(ErrorCode::InvalidArgument, "grid value iteration needs n_x = 2 and n_u = 1");
  if (unc && unc->num_ab() > 8)
    throw Error(ErrorCode::InvalidArgument, "grid value iteration takes at most 8 (A, B) vertices");
  if (u_res < 2) throw Error(ErrorCode::InvalidArgument, "u_res must be >= 2");
  BellmanProblem bp{&sys, &cost, &domain, {}, {}, {}, {}, {}, {}};
  if (unc) {
    bp.AB = unc->AB;
    bp.W = distinct_w_vertices(*unc);
  } else {
    bp.AB.emplace_back(sys.A, sys.B);
    bp.W.push_back(Vec::Zero(2));
  }
  const double ulo = -support(sys.U, Vec::Constant(1, -1.0));
  const double uhi = support(sys.U, Vec::Constant(1, 1.0));
  bp.u_grid = Vec::LinSpaced(u_res, ulo, uhi);
  const int n0 = static_cast<int>(grid.axis0.size()), n1 = static_cast<int>(grid.axis1.size());
  bp.points.resize(static_cast<size_t>(n0) * n1);
  bp.state_cost.resize(n0 * n1);
  bp.KX.resize(1, n0 * n1);
  const Mat I = Mat::Identity(2, 2);
  for (int a = 0; a < n0; ++a)
    for (int b = 0; b < n1; ++b) {
      const int node = a * n1 + b;
      Vec x(2);
      x << grid.axis0(a), grid.axis1(b);
      if (!grid.mask(a, b)) x = project(domain, x, I);
      bp.points[node] = x;
      if (cost.kind == StageCost::Kind::Quadratic) {
        bp.state_cost(node) = x.dot(cost.Q * x);
        bp.KX(0, node) = 0.0;
      } else {
        const Vec d = x - project(cost.target, x, cost.Q);
        bp.state_cost(node) = d.dot(cost.Q * d);
        bp.KX(0, node) = (cost.K * x)(0);
      }
    }
  return bp;
}

void bellman_sweep_serial(const BellmanProblem& bp, const GridFunction& in, Mat& out) {
  const int n1 = static_cast<int>(in.axis1.size());
  out.resize(in.values.rows(), in.values.cols());
  for (int node = 0; node < static_cast<int>(bp.points.size()); ++node)
    out(node / n1, node % n1) = node_update(bp, in, in.values, node);
}

void bellman_sweep_parallel(const BellmanProblem& bp, const GridFunction& in, Mat& out) {
  const int n1 = static_cast<int>(in.axis1.size());
  out.resize(in.values.rows(), in.values.cols());
  const int total = static_cast<int>(bp.points.size());
#pragma omp parallel for schedule(dynamic, 64)
  for (int node = 0; node < total; ++node)
    out(node / n1, node % n1) = node_update(bp, in, in.values, node);
}

GridFunction value_iteration(const LinearSystem& sys, const StageCost& cost,
                             const HPolyhedron& domain, const UncertaintyModel* unc,
                             const ValueIterationOptions& opt) {
  if (opt.grid_res < 2 || opt.grid_res > 401)
    throw Error(ErrorCode::InvalidArgument, "grid_res must lie in [2, 401]");
  if (domain.dim() != 2) throw Error(ErrorCode::InvalidArgument, "grid domain must be planar");
  GridFunction g;
  const double lo0 = -support(domain, -Vec::Unit(2, 0)), hi0 = support(domain, Vec::Unit(2, 0));
  const double lo1 = -support(domain, -Vec::Unit(2, 1)), hi1 = support(domain, Vec::Unit(2, 1));
  g.axis0 = Vec::LinSpaced(opt.grid_res, lo0, hi0);
  g.axis1 = Vec::LinSpaced(opt.grid_res, lo1, hi1);
  g.values = Mat::Zero(opt.grid_res, opt.grid_res);
  g.mask.resize(opt.grid_res, opt.grid_res);
  for (int a = 0; a < opt.grid_res; ++a)
    for (int b = 0; b < opt.grid_res; ++b) {
      Vec x(2);
      x << g.axis0(a), g.axis1(b);
      g.mask(a, b) = domain.contains(x, 1e-9);
    }
  const BellmanProblem bp = make_bellman_problem(sys, cost, domain, unc, g, opt.u_res);
  Eigen::Matrix<bool, -1, -1> pinned = Eigen::Matrix<bool, -1, -1>::Zero(opt.grid_res, opt.grid_res);
  if (opt.zero_set)
    for (int a = 0; a < opt.grid_res; ++a)
      for (int b = 0; b < opt.grid_res; ++b) {
        Vec x(2);
        x << g.axis0(a), g.axis1(b);
        pinned(a, b) = g.mask(a, b) && opt.zero_set->contains(x, 1e-9);
      }
  Mat next;
  for (int it = 0; it < opt.max_iter; ++it) {
    if (opt.parallel)
      bellman_sweep_parallel(bp, g, next);
    else
      bellman_sweep_serial(bp, g, next);
    next = pinned.select(Mat::Zero(next.rows(), next.cols()), next);
    double change = 0.0;
    for (int a = 0; a < next.rows(); ++a)
      for (int b = 0; b < next.cols(); ++b) {
        const double o = g.values(a, b), n = next(a, b);
        if (std::isfinite(o) && std::isfinite(n)) {
          g.monotone_violation = std::max(g.monotone_violation, o - n);
          if (g.mask(a, b)) change = std::max(change, std::abs(n - o));
        } else if (std::isfinite(o) != std::isfinite(n)) {
          if (std::isfinite(n)) g.monotone_violation = kInf;
          if (g.mask(a, b)) change = kInf;
        }
      }
    g.values.swap(next);
    g.iterations = it + 1;
    g.residual = change;
    if (change <= opt.tol) {
      g.converged = true;
      break;
    }
  }
  return g;
}

}  // namespace polyclf
