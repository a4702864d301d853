#pragma once

#include <optional>
#include <vector>

#include "polyclf/conic.hpp"
#include "polyclf/geometry.hpp"
#include "polyclf/model.hpp"
#include "polyclf/types.hpp"

namespace polyclf {

/// x' P x.
struct QuadForm {
  Mat P;

  double eval(const Vec& x) const { return x.dot(P * x); }
};

/// One Riccati map  Q + A'PA - A'PB (R + B'PB)^-1 B'PA.
Mat riccati_step(const Mat& P, const Mat& A, const Mat& B, const Mat& Q, const Mat& R);

/// Unconstrained infinite-horizon LQR cost, by fixed-point iteration of the
/// Riccati map from P = Q until the step is below `tol`.  Throws
/// NotStabilizable when the iterates blow up or stall, ModeMismatch for a
/// set-distance cost.
QuadForm lqr_underestimator(const LinearSystem& sys, const StageCost& cost, double tol = 1e-12,
                            int max_iter = 1000000);

/// u = K x for the LQR cost-to-go P.
Mat lqr_gain(const QuadForm& P, const LinearSystem& sys, const StageCost& cost);

struct ZetaOptions {
  bool parallel = true;
  SolverOptions solver;
  int max_horizon = 4;   // minmax only
  long max_nodes = 100000;  // minmax only
};

/// Per-row maxima of  G_i x_0 + h_i (sum_k L(x_k, u_k) + Mbar(x_N))  over
/// admissible N-step trajectories.  `F` is the facet matrix (G h) with
/// h_i <= 0; Mbar = nullptr means zero terminal cost.
Vec zeta_nominal(const Mat& F, const LinearSystem& sys, const StageCost& cost,
                 const QuadForm* Mbar, int N, const ZetaOptions& opt = {});

/// Worst-case version over the scenario tree of (A_l, B_l) and W vertices.
/// Controls are shared between scenarios with the same history.  Throws
/// TreeTooLarge when N > opt.max_horizon or the tree exceeds opt.max_nodes.
Vec zeta_minmax(const Mat& F, const LinearSystem& sys, const UncertaintyModel& unc,
                const StageCost& cost, const QuadForm* Mbar, int N, const ZetaOptions& opt = {});

/// Distinct vertices of W (a degenerate W such as {0} gives one).
std::vector<Vec> distinct_w_vertices(const UncertaintyModel& unc);

/// Number of nodes of the depth-N tree with `branches` children per node.
long scenario_tree_nodes(int branches, int N);

/// J_N(x0) = min sum_{k<N} L(x_k, u_k) + Mbar(x_N) with x_k, x_N in X and
/// u_k in U; +inf when no admissible trajectory exists.
double ocp_value(const LinearSystem& sys, const StageCost& cost, const QuadForm* Mbar, int N,
                 const Vec& x0, const SolverOptions& opt = {});

/// Values on a tensor grid over the bounding box of a planar domain.
struct GridFunction {
  Vec axis0;
  Vec axis1;
  Mat values;                       // values(a, b) at (axis0(a), axis1(b))
  Eigen::Matrix<bool, -1, -1> mask; // node lies in the domain
  int iterations = 0;
  double residual = kInf;  // last sup-norm change over domain nodes
  bool converged = false;
  double monotone_violation = 0.0;  // max over sweeps of M^k - M^{k+1}, clamped at 0

  /// Bilinear interpolation; +inf outside the box or when a corner is +inf.
  double eval(const Vec& x) const;
  /// Max minus min of the corner values of the cell containing x.
  double cell_variation(const Vec& x) const;
  /// Largest cell variation over the grid (finite cells touching the domain).
  double max_cell_variation() const;
  /// Max of the finite values on domain nodes.
  double max_value() const;
};

struct ValueIterationOptions {
  int grid_res = 301;
  int u_res = 101;
  int max_iter = 2000;
  double tol = 1e-6;
  bool parallel = true;
  /// Nodes inside this set are held at 0, e.g. an RCI target on which the
  /// set-distance cost vanishes under u = K x.
  const HPolyhedron* zero_set = nullptr;
};

/// Bellman iteration M^{k+1}(x) = min_u [max_l,w] L(x, u) + M^k(x+) from
/// M^0 = 0, with x+ outside the domain worth +inf.  Nodes outside the domain
/// are ghost nodes: their update is evaluated at the Euclidean projection
/// onto the domain, so interpolation near the boundary stays finite.
/// Needs n_x = 2 and a scalar input.
GridFunction value_iteration(const LinearSystem& sys, const StageCost& cost,
                             const HPolyhedron& domain, const UncertaintyModel* unc,
                             const ValueIterationOptions& opt = {});

/// One Jacobi sweep over every node; `points` are the evaluation points of
/// the nodes (projections for ghost nodes) and `stage` the state part of the
/// stage cost there.  Exposed for benchmarking the serial and OpenMP variants.
struct BellmanProblem {
  const LinearSystem* sys;
  const StageCost* cost;
  const HPolyhedron* domain;
  std::vector<std::pair<Mat, Mat>> AB;
  std::vector<Vec> W;
  Vec u_grid;
  std::vector<Vec> points;
  Vec state_cost;
  Mat KX;  // K * point per node (set-distance cost only)
};

BellmanProblem make_bellman_problem(const LinearSystem& sys, const StageCost& cost,
                                    const HPolyhedron& domain, const UncertaintyModel* unc,
                                    const GridFunction& grid, int u_res);
void bellman_sweep_serial(const BellmanProblem& bp, const GridFunction& in, Mat& out);
void bellman_sweep_parallel(const BellmanProblem& bp, const GridFunction& in, Mat& out);

}  // namespace polyclf
